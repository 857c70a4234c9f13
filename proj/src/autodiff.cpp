#include "reprobe/autodiff.hpp"

#include <cmath>
#include <stdexcept>
#include <variant>

namespace reprobe {

namespace {

template <typename T>
struct Ctx {
    std::vector<T> input;               // saved layer input where backward needs it
    std::vector<std::size_t> argmax;    // max-pool routing (flat plane indices)
    std::vector<Ctx<T>> inner;          // residual sub-tape
};

template <typename T>
void forward_tape(const Layer& layer, const std::vector<std::size_t>& in_shape,
                  const std::vector<std::size_t>& out_shape,
                  const std::vector<T>& in, std::vector<T>& out, Ctx<T>& ctx);

template <typename T>
void dense_fwd(const DenseLayer& l, const std::vector<T>& in, std::vector<T>& out) {
    const std::size_t rows = l.weights.shape()[0];
    const std::size_t cols = l.weights.shape()[1];
    auto w = l.weights.data<T>();
    for (std::size_t r = 0; r < rows; ++r) {
        T acc = l.bias ? l.bias->data<T>()[r] : T(0);
        const T* wr = w.data() + r * cols;
        for (std::size_t c = 0; c < cols; ++c) acc += wr[c] * in[c];
        out[r] = acc;
    }
}

template <typename T>
void conv_fwd(const Conv2dLayer& l, const std::vector<std::size_t>& in_shape,
              const std::vector<std::size_t>& out_shape, const std::vector<T>& in,
              std::vector<T>& out) {
    const std::size_t in_c = in_shape[0], in_h = in_shape[1], in_w = in_shape[2];
    const std::size_t out_c = out_shape[0], out_h = out_shape[1], out_w = out_shape[2];
    const std::size_t kh = l.kernels.shape()[2], kw = l.kernels.shape()[3];
    auto k = l.kernels.data<T>();
    const long pad = static_cast<long>(l.padding);
    for (std::size_t oc = 0; oc < out_c; ++oc) {
        const T bias = l.bias ? l.bias->data<T>()[oc] : T(0);
        for (std::size_t oy = 0; oy < out_h; ++oy) {
            for (std::size_t ox = 0; ox < out_w; ++ox) {
                T acc = bias;
                for (std::size_t ic = 0; ic < in_c; ++ic) {
                    const T* plane = in.data() + ic * in_h * in_w;
                    const T* kern = k.data() + ((oc * in_c + ic) * kh) * kw;
                    for (std::size_t ky = 0; ky < kh; ++ky) {
                        const long sy = static_cast<long>(oy * l.stride + ky) - pad;
                        if (sy < 0 || sy >= static_cast<long>(in_h)) continue;
                        for (std::size_t kx = 0; kx < kw; ++kx) {
                            const long sx = static_cast<long>(ox * l.stride + kx) - pad;
                            if (sx < 0 || sx >= static_cast<long>(in_w)) continue;
                            acc += kern[ky * kw + kx] * plane[sy * in_w + sx];
                        }
                    }
                }
                out[(oc * out_h + oy) * out_w + ox] = acc;
            }
        }
    }
}

template <typename T>
void forward_tape(const Layer& layer, const std::vector<std::size_t>& in_shape,
                  const std::vector<std::size_t>& out_shape,
                  const std::vector<T>& in, std::vector<T>& out, Ctx<T>& ctx) {
    out.assign(shape_elems(out_shape), T(0));
    std::visit(
        [&](const auto& l) {
            using L = std::decay_t<decltype(l)>;
            if constexpr (std::is_same_v<L, DenseLayer>) {
                ctx.input = in;
                dense_fwd<T>(l, in, out);
            } else if constexpr (std::is_same_v<L, Conv2dLayer>) {
                ctx.input = in;
                conv_fwd<T>(l, in_shape, out_shape, in, out);
            } else if constexpr (std::is_same_v<L, MaxPoolLayer>) {
                const std::size_t channels = in_shape[0], in_h = in_shape[1], in_w = in_shape[2];
                const std::size_t out_h = out_shape[1], out_w = out_shape[2];
                ctx.argmax.assign(shape_elems(out_shape), 0);
                for (std::size_t c = 0; c < channels; ++c) {
                    const T* plane = in.data() + c * in_h * in_w;
                    for (std::size_t oy = 0; oy < out_h; ++oy)
                        for (std::size_t ox = 0; ox < out_w; ++ox) {
                            std::size_t best_idx = (oy * l.stride) * in_w + (ox * l.stride);
                            T best = plane[best_idx];
                            for (std::size_t wy = 0; wy < l.window; ++wy)
                                for (std::size_t wx = 0; wx < l.window; ++wx) {
                                    const std::size_t idx =
                                        (oy * l.stride + wy) * in_w + (ox * l.stride + wx);
                                    if (plane[idx] > best) {
                                        best = plane[idx];
                                        best_idx = idx;
                                    }
                                }
                            const std::size_t o = (c * out_h + oy) * out_w + ox;
                            out[o] = best;
                            ctx.argmax[o] = c * in_h * in_w + best_idx;
                        }
                }
            } else if constexpr (std::is_same_v<L, AvgPoolLayer>) {
                const std::size_t channels = in_shape[0], in_h = in_shape[1], in_w = in_shape[2];
                const std::size_t out_h = out_shape[1], out_w = out_shape[2];
                for (std::size_t c = 0; c < channels; ++c) {
                    const T* plane = in.data() + c * in_h * in_w;
                    for (std::size_t oy = 0; oy < out_h; ++oy)
                        for (std::size_t ox = 0; ox < out_w; ++ox) {
                            T acc = 0;
                            for (std::size_t wy = 0; wy < l.window; ++wy)
                                for (std::size_t wx = 0; wx < l.window; ++wx)
                                    acc += plane[(oy * l.stride + wy) * in_w + (ox * l.stride + wx)];
                            out[(c * out_h + oy) * out_w + ox] = acc / static_cast<T>(l.window * l.window);
                        }
                }
            } else if constexpr (std::is_same_v<L, ReluLayer>) {
                ctx.input = in;
                for (std::size_t i = 0; i < in.size(); ++i) out[i] = in[i] > T(0) ? in[i] : T(0);
            } else if constexpr (std::is_same_v<L, FlattenLayer>) {
                out = in;
            } else {
                ctx.inner.resize(l.inner.size());
                std::vector<T> cur = in;
                std::vector<T> next;
                std::vector<std::size_t> cur_shape = in_shape;
                for (std::size_t i = 0; i < l.inner.size(); ++i) {
                    const auto next_shape = layer_output_shape(l.inner[i], cur_shape);
                    forward_tape<T>(l.inner[i], cur_shape, next_shape, cur, next, ctx.inner[i]);
                    cur.swap(next);
                    cur_shape = next_shape;
                }
                for (std::size_t i = 0; i < in.size(); ++i) out[i] = in[i] + cur[i];
            }
        },
        layer.kind);
}

template <typename T>
void backward_tape(const Layer& layer, const std::vector<std::size_t>& in_shape,
                   const std::vector<std::size_t>& out_shape, const Ctx<T>& ctx,
                   const std::vector<T>& dout, std::vector<T>& din, LayerGrads* grads);

template <typename T>
void accumulate(Tensor& grad, const std::vector<std::size_t>& shape, Precision prec,
                const std::vector<T>& values) {
    if (grad.empty()) grad = Tensor::zeros(shape, prec);
    auto g = grad.data<T>();
    for (std::size_t i = 0; i < values.size(); ++i) g[i] += values[i];
}

template <typename T>
void backward_tape(const Layer& layer, const std::vector<std::size_t>& in_shape,
                   const std::vector<std::size_t>& out_shape, const Ctx<T>& ctx,
                   const std::vector<T>& dout, std::vector<T>& din, LayerGrads* grads) {
    din.assign(shape_elems(in_shape), T(0));
    std::visit(
        [&](const auto& l) {
            using L = std::decay_t<decltype(l)>;
            if constexpr (std::is_same_v<L, DenseLayer>) {
                const std::size_t rows = l.weights.shape()[0];
                const std::size_t cols = l.weights.shape()[1];
                const Tensor& weights = l.weights;
                auto w = weights.data<T>();
                for (std::size_t r = 0; r < rows; ++r) {
                    const T d = dout[r];
                    if (d == T(0)) continue;
                    const T* wr = w.data() + r * cols;
                    for (std::size_t c = 0; c < cols; ++c) din[c] += wr[c] * d;
                }
                if (grads) {
                    std::vector<T> wg(rows * cols, T(0));
                    for (std::size_t r = 0; r < rows; ++r) {
                        const T d = dout[r];
                        if (d == T(0)) continue;
                        for (std::size_t c = 0; c < cols; ++c) wg[r * cols + c] = d * ctx.input[c];
                    }
                    accumulate<T>(grads->weights, l.weights.shape(), l.weights.precision(), wg);
                    if (l.bias)
                        accumulate<T>(grads->bias, l.bias->shape(), l.bias->precision(), dout);
                }
            } else if constexpr (std::is_same_v<L, Conv2dLayer>) {
                const std::size_t in_c = in_shape[0], in_h = in_shape[1], in_w = in_shape[2];
                const std::size_t out_c = out_shape[0], out_h = out_shape[1], out_w = out_shape[2];
                const std::size_t kh = l.kernels.shape()[2], kw = l.kernels.shape()[3];
                const Tensor& kernels = l.kernels;
                auto k = kernels.data<T>();
                const long pad = static_cast<long>(l.padding);
                std::vector<T> kg;
                std::vector<T> bg;
                if (grads) {
                    kg.assign(l.kernels.size(), T(0));
                    if (l.bias) bg.assign(out_c, T(0));
                }
                for (std::size_t oc = 0; oc < out_c; ++oc) {
                    for (std::size_t oy = 0; oy < out_h; ++oy) {
                        for (std::size_t ox = 0; ox < out_w; ++ox) {
                            const T d = dout[(oc * out_h + oy) * out_w + ox];
                            if (d == T(0)) continue;
                            if (grads && l.bias) bg[oc] += d;
                            for (std::size_t ic = 0; ic < in_c; ++ic) {
                                const T* kern = k.data() + ((oc * in_c + ic) * kh) * kw;
                                for (std::size_t ky = 0; ky < kh; ++ky) {
                                    const long sy = static_cast<long>(oy * l.stride + ky) - pad;
                                    if (sy < 0 || sy >= static_cast<long>(in_h)) continue;
                                    for (std::size_t kx = 0; kx < kw; ++kx) {
                                        const long sx = static_cast<long>(ox * l.stride + kx) - pad;
                                        if (sx < 0 || sx >= static_cast<long>(in_w)) continue;
                                        const std::size_t si = (ic * in_h + sy) * in_w + sx;
                                        din[si] += kern[ky * kw + kx] * d;
                                        if (grads)
                                            kg[((oc * in_c + ic) * kh + ky) * kw + kx] +=
                                                ctx.input[si] * d;
                                    }
                                }
                            }
                        }
                    }
                }
                if (grads) {
                    accumulate<T>(grads->weights, l.kernels.shape(), l.kernels.precision(), kg);
                    if (l.bias)
                        accumulate<T>(grads->bias, l.bias->shape(), l.bias->precision(), bg);
                }
            } else if constexpr (std::is_same_v<L, MaxPoolLayer>) {
                for (std::size_t o = 0; o < dout.size(); ++o) din[ctx.argmax[o]] += dout[o];
            } else if constexpr (std::is_same_v<L, AvgPoolLayer>) {
                const std::size_t channels = in_shape[0], in_h = in_shape[1], in_w = in_shape[2];
                const std::size_t out_h = out_shape[1], out_w = out_shape[2];
                const T scale = T(1) / static_cast<T>(l.window * l.window);
                for (std::size_t c = 0; c < channels; ++c)
                    for (std::size_t oy = 0; oy < out_h; ++oy)
                        for (std::size_t ox = 0; ox < out_w; ++ox) {
                            const T d = dout[(c * out_h + oy) * out_w + ox] * scale;
                            for (std::size_t wy = 0; wy < l.window; ++wy)
                                for (std::size_t wx = 0; wx < l.window; ++wx)
                                    din[(c * in_h + oy * l.stride + wy) * in_w +
                                        (ox * l.stride + wx)] += d;
                        }
            } else if constexpr (std::is_same_v<L, ReluLayer>) {
                for (std::size_t i = 0; i < dout.size(); ++i)
                    din[i] = ctx.input[i] > T(0) ? dout[i] : T(0);
            } else if constexpr (std::is_same_v<L, FlattenLayer>) {
                din = dout;
            } else {
                // d(in + inner(in)) = dout + inner'(dout)
                std::vector<std::vector<std::size_t>> shapes{in_shape};
                for (const Layer& inner : l.inner)
                    shapes.push_back(layer_output_shape(inner, shapes.back()));
                std::vector<T> cur = dout;
                std::vector<T> prev;
                for (std::size_t i = l.inner.size(); i-- > 0;) {
                    LayerGrads* inner_grads = nullptr;
                    if (grads) {
                        if (grads->inner.size() != l.inner.size())
                            grads->inner.resize(l.inner.size());
                        inner_grads = &grads->inner[i];
                    }
                    backward_tape<T>(l.inner[i], shapes[i], shapes[i + 1], ctx.inner[i],
                                     cur, prev, inner_grads);
                    cur.swap(prev);
                }
                for (std::size_t i = 0; i < din.size(); ++i) din[i] = dout[i] + cur[i];
            }
        },
        layer.kind);
}

template <typename T>
InputGradientEval input_gradient_impl(const Model& model, std::size_t l,
                                      const Tensor& a_n, const Tensor& y_hat) {
    std::vector<Ctx<T>> tape(l);
    std::vector<T> cur(a_n.size());
    auto src = a_n.data<T>();
    for (std::size_t i = 0; i < cur.size(); ++i) cur[i] = src[i];
    std::vector<T> next;
    for (std::size_t k = 0; k < l; ++k) {
        forward_tape<T>(model.layers()[k], model.layer_shape(k), model.layer_shape(k + 1),
                        cur, next, tape[k]);
        cur.swap(next);
    }

    auto yh = y_hat.data<T>();
    double l1 = 0.0;
    std::vector<T> dout(cur.size());
    for (std::size_t i = 0; i < cur.size(); ++i) {
        const T diff = cur[i] - yh[i];
        l1 += std::abs(static_cast<double>(diff));
        dout[i] = diff > T(0) ? T(1) : (diff < T(0) ? T(-1) : T(0));
    }

    InputGradientEval eval;
    eval.output = Tensor(model.layer_shape(l), a_n.precision());
    auto out_dst = eval.output.data<T>();
    for (std::size_t i = 0; i < cur.size(); ++i) out_dst[i] = cur[i];
    eval.l1_value = l1;

    std::vector<T> din;
    for (std::size_t k = l; k-- > 0;) {
        backward_tape<T>(model.layers()[k], model.layer_shape(k), model.layer_shape(k + 1),
                         tape[k], dout, din, nullptr);
        dout.swap(din);
    }
    eval.gradient = Tensor(a_n.shape(), a_n.precision());
    auto g = eval.gradient.data<T>();
    for (std::size_t i = 0; i < dout.size(); ++i) g[i] = dout[i];
    return eval;
}

}  // namespace

InputGradientEval input_gradient_eval(const Model& model, std::size_t l,
                                      const Tensor& a_n, const Tensor& y_hat) {
    if (l < 1 || l > model.layer_count())
        throw std::invalid_argument("input_gradient: layer index out of range");
    if (a_n.shape() != model.input_shape())
        throw std::invalid_argument("input_gradient: input shape mismatch");
    if (y_hat.shape() != model.layer_shape(l))
        throw std::invalid_argument("input_gradient: target embedding shape mismatch");
    if (a_n.precision() != model.precision() || y_hat.precision() != model.precision())
        throw std::invalid_argument("input_gradient: precision mismatch");
    if (model.precision() == Precision::f32)
        return input_gradient_impl<float>(model, l, a_n, y_hat);
    return input_gradient_impl<double>(model, l, a_n, y_hat);
}

Tensor input_gradient(const Model& model, std::size_t l, const Tensor& a_n,
                      const Tensor& y_hat) {
    return input_gradient_eval(model, l, a_n, y_hat).gradient;
}

double cross_entropy(const Tensor& logits, int label) {
    double max_logit = logits.at(0);
    for (std::size_t i = 1; i < logits.size(); ++i)
        max_logit = std::max(max_logit, logits.at(i));
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i)
        sum += std::exp(logits.at(i) - max_logit);
    return std::log(sum) + max_logit - logits.at(static_cast<std::size_t>(label));
}

namespace {

template <typename T>
ParamGradients param_gradients_impl(const Model& model,
                                    const std::vector<Tensor>& inputs,
                                    const std::vector<int>& labels) {
    const std::size_t L = model.layer_count();
    const std::size_t classes = shape_elems(model.layer_shape(L));
    ParamGradients result;
    result.layers.resize(L);
    const double inv_batch = 1.0 / static_cast<double>(inputs.size());

    std::vector<Ctx<T>> tape(L);
    for (std::size_t b = 0; b < inputs.size(); ++b) {
        if (inputs[b].shape() != model.input_shape())
            throw std::invalid_argument("param_gradients: input shape mismatch");
        if (labels[b] < 0 || static_cast<std::size_t>(labels[b]) >= classes)
            throw std::invalid_argument("param_gradients: label out of range");
        std::vector<T> cur(inputs[b].size());
        auto src = inputs[b].data<T>();
        for (std::size_t i = 0; i < cur.size(); ++i) cur[i] = src[i];
        std::vector<T> next;
        for (std::size_t k = 0; k < L; ++k) {
            forward_tape<T>(model.layers()[k], model.layer_shape(k), model.layer_shape(k + 1),
                            cur, next, tape[k]);
            cur.swap(next);
        }
        // softmax cross-entropy head
        double max_logit = cur[0];
        for (const T v : cur) max_logit = std::max(max_logit, static_cast<double>(v));
        double sum = 0.0;
        for (const T v : cur) sum += std::exp(static_cast<double>(v) - max_logit);
        result.mean_loss +=
            inv_batch * (std::log(sum) + max_logit - static_cast<double>(cur[labels[b]]));
        std::vector<T> dout(cur.size());
        for (std::size_t i = 0; i < cur.size(); ++i) {
            double p = std::exp(static_cast<double>(cur[i]) - max_logit) / sum;
            if (static_cast<int>(i) == labels[b]) p -= 1.0;
            dout[i] = static_cast<T>(p * inv_batch);
        }
        std::vector<T> din;
        for (std::size_t k = L; k-- > 0;) {
            backward_tape<T>(model.layers()[k], model.layer_shape(k), model.layer_shape(k + 1),
                             tape[k], dout, din, &result.layers[k]);
            dout.swap(din);
        }
    }
    return result;
}

}  // namespace

ParamGradients param_gradients(const Model& model,
                               const std::vector<Tensor>& batch_inputs,
                               const std::vector<int>& batch_labels) {
    if (batch_inputs.empty() || batch_inputs.size() != batch_labels.size())
        throw std::invalid_argument("param_gradients: batch inputs and labels must align");
    if (model.layer_shape(model.layer_count()).size() != 1)
        throw std::invalid_argument("param_gradients: model must end in a logit vector");
    if (!std::holds_alternative<DenseLayer>(model.layers().back().kind))
        throw std::invalid_argument("param_gradients: model must end in a Dense layer");
    if (model.precision() == Precision::f32)
        return param_gradients_impl<float>(model, batch_inputs, batch_labels);
    return param_gradients_impl<double>(model, batch_inputs, batch_labels);
}

}  // namespace reprobe
