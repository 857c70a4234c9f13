#include "reprobe/layers.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace reprobe {

namespace {

std::size_t conv_out_dim(std::size_t in, std::size_t k, std::size_t stride,
                         std::size_t pad, const char* what) {
    const long padded = static_cast<long>(in) + 2 * static_cast<long>(pad);
    const long span = padded - static_cast<long>(k);
    if (span < 0 || stride == 0)
        throw std::invalid_argument(std::string(what) + ": window larger than padded input");
    return static_cast<std::size_t>(span) / stride + 1;
}

Tensor kaiming_uniform(SeededRng& rng, std::vector<std::size_t> shape,
                       std::size_t fan_in, Precision prec) {
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    Tensor t(std::move(shape), prec);
    for (std::size_t i = 0; i < t.size(); ++i)
        t.set(i, bound * (2.0 * rng.next_uniform() - 1.0));
    return t;
}

}  // namespace

std::vector<std::size_t> layer_output_shape(const Layer& layer,
                                            const std::vector<std::size_t>& in_shape) {
    return std::visit(
        [&](const auto& l) -> std::vector<std::size_t> {
            using L = std::decay_t<decltype(l)>;
            if constexpr (std::is_same_v<L, DenseLayer>) {
                if (in_shape.size() != 1)
                    throw std::invalid_argument("dense layer expects a rank-1 input");
                if (l.weights.rank() != 2 || l.weights.shape()[1] != in_shape[0])
                    throw std::invalid_argument("dense weight shape does not match input");
                if (l.bias && l.bias->shape() != std::vector<std::size_t>{l.weights.shape()[0]})
                    throw std::invalid_argument("dense bias shape does not match weights");
                return {l.weights.shape()[0]};
            } else if constexpr (std::is_same_v<L, Conv2dLayer>) {
                if (in_shape.size() != 3)
                    throw std::invalid_argument("conv2d expects a [C,H,W] input");
                if (l.kernels.rank() != 4 || l.kernels.shape()[1] != in_shape[0])
                    throw std::invalid_argument("conv2d kernel channels do not match input");
                const std::size_t out_c = l.kernels.shape()[0];
                if (l.bias && l.bias->shape() != std::vector<std::size_t>{out_c})
                    throw std::invalid_argument("conv2d bias shape does not match kernels");
                return {out_c,
                        conv_out_dim(in_shape[1], l.kernels.shape()[2], l.stride, l.padding, "conv2d"),
                        conv_out_dim(in_shape[2], l.kernels.shape()[3], l.stride, l.padding, "conv2d")};
            } else if constexpr (std::is_same_v<L, MaxPoolLayer> ||
                                 std::is_same_v<L, AvgPoolLayer>) {
                if (in_shape.size() != 3)
                    throw std::invalid_argument("pooling expects a [C,H,W] input");
                return {in_shape[0],
                        conv_out_dim(in_shape[1], l.window, l.stride, 0, "pool"),
                        conv_out_dim(in_shape[2], l.window, l.stride, 0, "pool")};
            } else if constexpr (std::is_same_v<L, ReluLayer>) {
                return in_shape;
            } else if constexpr (std::is_same_v<L, FlattenLayer>) {
                return {shape_elems(in_shape)};
            } else {
                std::vector<std::size_t> shape = in_shape;
                for (const Layer& inner : l.inner) shape = layer_output_shape(inner, shape);
                if (shape != in_shape)
                    throw std::invalid_argument("residual inner stack must preserve shape");
                return in_shape;
            }
        },
        layer.kind);
}

Model::Model(std::vector<std::size_t> input_shape, std::vector<Layer> layers,
             Precision prec, std::uint64_t init_seed,
             std::vector<std::size_t> group_ends)
    : input_shape_(std::move(input_shape)),
      layers_(std::move(layers)),
      prec_(prec),
      init_seed_(init_seed),
      group_ends_(std::move(group_ends)) {
    if (layers_.empty()) throw std::invalid_argument("model needs at least one layer");
    shapes_.push_back(input_shape_);
    for (const Layer& layer : layers_)
        shapes_.push_back(layer_output_shape(layer, shapes_.back()));
    for (std::size_t l = 1; l < shapes_.size(); ++l) {
        if (shape_elems(shapes_[l]) < shape_elems(shapes_[l - 1])) {
            shrinks_information_ = true;
            break;
        }
    }
    for (std::size_t g : group_ends_) {
        if (g == 0 || g > layers_.size())
            throw std::invalid_argument("group boundary out of range");
    }
}

const std::vector<std::size_t>& Model::layer_shape(std::size_t l) const {
    if (l >= shapes_.size())
        throw std::invalid_argument("layer index " + std::to_string(l) + " out of range");
    return shapes_[l];
}

Model build_mlp(std::size_t input_elems, const std::vector<std::size_t>& hidden_widths,
                bool use_bias, bool use_relu, SeededRng& rng, Precision prec) {
    if (input_elems == 0) throw std::invalid_argument("build_mlp: input size must be positive");
    if (hidden_widths.empty()) throw std::invalid_argument("build_mlp: need at least one width");
    for (std::size_t w : hidden_widths)
        if (w == 0) throw std::invalid_argument("build_mlp: widths must be positive");
    std::vector<Layer> layers;
    std::size_t prev = input_elems;
    for (std::size_t i = 0; i < hidden_widths.size(); ++i) {
        const std::size_t width = hidden_widths[i];
        DenseLayer dense;
        dense.weights = kaiming_uniform(rng, {width, prev}, prev, prec);
        if (use_bias) dense.bias = Tensor::zeros({width}, prec);
        layers.push_back(Layer{std::move(dense)});
        if (use_relu && i + 1 < hidden_widths.size()) layers.push_back(Layer{ReluLayer{}});
        prev = width;
    }
    return Model({input_elems}, std::move(layers), prec, rng.seed());
}

Model build_small_convnet(const std::vector<std::size_t>& input_shape,
                          std::size_t blocks, const std::vector<std::size_t>& channels,
                          bool with_residual, SeededRng& rng, Precision prec) {
    if (input_shape.size() != 3)
        throw std::invalid_argument("build_small_convnet: input must be [C,H,W]");
    if (blocks == 0 || channels.size() != blocks)
        throw std::invalid_argument("build_small_convnet: need one channel count per block");
    std::vector<Layer> layers;
    std::vector<std::size_t> group_ends;
    std::size_t in_c = input_shape[0];
    auto make_conv = [&](std::size_t out_c, std::size_t in_channels, std::size_t stride) {
        Conv2dLayer conv;
        conv.kernels = kaiming_uniform(rng, {out_c, in_channels, 3, 3}, in_channels * 9, prec);
        conv.bias = Tensor::zeros({out_c}, prec);
        conv.stride = stride;
        conv.padding = 1;
        return conv;
    };
    for (std::size_t b = 0; b < blocks; ++b) {
        const std::size_t out_c = channels[b];
        layers.push_back(Layer{make_conv(out_c, in_c, 2)});
        layers.push_back(Layer{ReluLayer{}});
        if (with_residual) {
            ResidualLayer res;
            res.inner.push_back(Layer{make_conv(out_c, out_c, 1)});
            res.inner.push_back(Layer{ReluLayer{}});
            res.inner.push_back(Layer{make_conv(out_c, out_c, 1)});
            layers.push_back(Layer{std::move(res)});
        }
        group_ends.push_back(layers.size());
        in_c = out_c;
    }
    return Model(input_shape, std::move(layers), prec, rng.seed(), std::move(group_ends));
}

namespace {

template <typename T>
void dense_forward(const DenseLayer& l, const T* in, T* out) {
    const std::size_t rows = l.weights.shape()[0];
    const std::size_t cols = l.weights.shape()[1];
    auto w = l.weights.data<T>();
    for (std::size_t r = 0; r < rows; ++r) {
        T acc = 0;
        const T* wr = w.data() + r * cols;
        for (std::size_t c = 0; c < cols; ++c) acc += wr[c] * in[c];
        out[r] = acc;
    }
    if (l.bias) {
        auto b = l.bias->data<T>();
        for (std::size_t r = 0; r < rows; ++r) out[r] += b[r];
    }
}

template <typename T>
void conv_forward(const Conv2dLayer& l, const std::vector<std::size_t>& in_shape,
                  const std::vector<std::size_t>& out_shape, const T* in, T* out) {
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
                    const T* plane = in + ic * in_h * in_w;
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

template <typename T, bool kMax>
void pool_forward(std::size_t window, std::size_t stride,
                  const std::vector<std::size_t>& in_shape,
                  const std::vector<std::size_t>& out_shape, const T* in, T* out) {
    const std::size_t channels = in_shape[0], in_h = in_shape[1], in_w = in_shape[2];
    const std::size_t out_h = out_shape[1], out_w = out_shape[2];
    for (std::size_t c = 0; c < channels; ++c) {
        const T* plane = in + c * in_h * in_w;
        for (std::size_t oy = 0; oy < out_h; ++oy) {
            for (std::size_t ox = 0; ox < out_w; ++ox) {
                if constexpr (kMax) {
                    // ties go to the lowest flat index (scan order)
                    T best = plane[(oy * stride) * in_w + (ox * stride)];
                    for (std::size_t wy = 0; wy < window; ++wy)
                        for (std::size_t wx = 0; wx < window; ++wx) {
                            const T v = plane[(oy * stride + wy) * in_w + (ox * stride + wx)];
                            if (v > best) best = v;
                        }
                    out[(c * out_h + oy) * out_w + ox] = best;
                } else {
                    T acc = 0;
                    for (std::size_t wy = 0; wy < window; ++wy)
                        for (std::size_t wx = 0; wx < window; ++wx)
                            acc += plane[(oy * stride + wy) * in_w + (ox * stride + wx)];
                    out[(c * out_h + oy) * out_w + ox] =
                        acc / static_cast<T>(window * window);
                }
            }
        }
    }
}

template <typename T>
void layer_forward(const Layer& layer, const std::vector<std::size_t>& in_shape,
                   const std::vector<std::size_t>& out_shape,
                   const std::vector<T>& in, std::vector<T>& out);

template <typename T>
void residual_forward(const ResidualLayer& l, const std::vector<std::size_t>& shape,
                      const std::vector<T>& in, std::vector<T>& out) {
    std::vector<T> cur = in;
    std::vector<T> next;
    std::vector<std::size_t> cur_shape = shape;
    for (const Layer& inner : l.inner) {
        const auto next_shape = layer_output_shape(inner, cur_shape);
        layer_forward(inner, cur_shape, next_shape, cur, next);
        cur.swap(next);
        cur_shape = next_shape;
    }
    out.resize(in.size());
    for (std::size_t i = 0; i < in.size(); ++i) out[i] = in[i] + cur[i];
}

template <typename T>
void layer_forward(const Layer& layer, const std::vector<std::size_t>& in_shape,
                   const std::vector<std::size_t>& out_shape,
                   const std::vector<T>& in, std::vector<T>& out) {
    out.assign(shape_elems(out_shape), T(0));
    std::visit(
        [&](const auto& l) {
            using L = std::decay_t<decltype(l)>;
            if constexpr (std::is_same_v<L, DenseLayer>) {
                dense_forward<T>(l, in.data(), out.data());
            } else if constexpr (std::is_same_v<L, Conv2dLayer>) {
                conv_forward<T>(l, in_shape, out_shape, in.data(), out.data());
            } else if constexpr (std::is_same_v<L, MaxPoolLayer>) {
                pool_forward<T, true>(l.window, l.stride, in_shape, out_shape, in.data(), out.data());
            } else if constexpr (std::is_same_v<L, AvgPoolLayer>) {
                pool_forward<T, false>(l.window, l.stride, in_shape, out_shape, in.data(), out.data());
            } else if constexpr (std::is_same_v<L, ReluLayer>) {
                for (std::size_t i = 0; i < in.size(); ++i) out[i] = in[i] > T(0) ? in[i] : T(0);
            } else if constexpr (std::is_same_v<L, FlattenLayer>) {
                out = in;
            } else {
                residual_forward<T>(l, in_shape, in, out);
            }
        },
        layer.kind);
}

template <typename T>
Tensor run_forward(const Model& model, const Tensor& start, std::size_t from, std::size_t to) {
    std::vector<T> cur(start.size());
    auto src = start.data<T>();
    for (std::size_t i = 0; i < cur.size(); ++i) cur[i] = src[i];
    std::vector<T> next;
    for (std::size_t l = from; l < to; ++l) {
        layer_forward<T>(model.layers()[l], model.layer_shape(l), model.layer_shape(l + 1),
                         cur, next);
        cur.swap(next);
    }
    Tensor out(model.layer_shape(to), start.precision());
    auto dst = out.data<T>();
    for (std::size_t i = 0; i < cur.size(); ++i) dst[i] = cur[i];
    return out;
}

}  // namespace

Tensor forward_between_layers(const Model& model, const Tensor& embedding,
                              std::size_t from, std::size_t to) {
    if (to > model.layer_count() || from > to)
        throw std::invalid_argument("forward_between_layers: bad layer range");
    if (embedding.shape() != model.layer_shape(from))
        throw std::invalid_argument("forward_between_layers: embedding shape mismatch");
    if (embedding.precision() != model.precision())
        throw std::invalid_argument("forward_between_layers: precision mismatch");
    if (model.precision() == Precision::f32)
        return run_forward<float>(model, embedding, from, to);
    return run_forward<double>(model, embedding, from, to);
}

Tensor forward_to_layer(const Model& model, const Tensor& a, std::size_t l) {
    if (l < 1 || l > model.layer_count())
        throw std::invalid_argument("forward_to_layer: layer index out of range");
    return forward_between_layers(model, a, 0, l);
}

std::size_t count_layer_elements(const Model& model, std::size_t l) {
    return shape_elems(model.layer_shape(l));
}

Tensor first_layer_filters(const Model& model) {
    for (const Layer& layer : model.layers()) {
        if (const auto* conv = std::get_if<Conv2dLayer>(&layer.kind)) return conv->kernels;
        if (const auto* dense = std::get_if<DenseLayer>(&layer.kind)) return dense->weights;
    }
    throw std::invalid_argument("model has no parameterized layer");
}

namespace {

template <typename T>
void collect_relu_inputs(const Layer& layer, const std::vector<std::size_t>& in_shape,
                         const std::vector<std::size_t>& out_shape,
                         const std::vector<T>& in, std::vector<T>& out,
                         Precision prec, std::vector<Tensor>& collected) {
    if (const auto* res = std::get_if<ResidualLayer>(&layer.kind)) {
        std::vector<T> cur = in;
        std::vector<T> next;
        std::vector<std::size_t> cur_shape = in_shape;
        for (const Layer& inner : res->inner) {
            const auto next_shape = layer_output_shape(inner, cur_shape);
            collect_relu_inputs<T>(inner, cur_shape, next_shape, cur, next, prec, collected);
            cur.swap(next);
            cur_shape = next_shape;
        }
        out.resize(in.size());
        for (std::size_t i = 0; i < in.size(); ++i) out[i] = in[i] + cur[i];
        return;
    }
    if (std::holds_alternative<ReluLayer>(layer.kind)) {
        Tensor pre(in_shape, prec);
        auto dst = pre.data<T>();
        for (std::size_t i = 0; i < in.size(); ++i) dst[i] = in[i];
        collected.push_back(std::move(pre));
    }
    layer_forward<T>(layer, in_shape, out_shape, in, out);
}

template <typename T>
std::vector<Tensor> relu_preactivations_impl(const Model& model, const Tensor& a) {
    std::vector<Tensor> collected;
    std::vector<T> cur(a.size());
    auto src = a.data<T>();
    for (std::size_t i = 0; i < cur.size(); ++i) cur[i] = src[i];
    std::vector<T> next;
    for (std::size_t l = 0; l < model.layer_count(); ++l) {
        collect_relu_inputs<T>(model.layers()[l], model.layer_shape(l),
                               model.layer_shape(l + 1), cur, next, model.precision(),
                               collected);
        cur.swap(next);
    }
    return collected;
}

Layer cast_layer(const Layer& layer, Precision target) {
    return std::visit(
        [&](const auto& l) -> Layer {
            using L = std::decay_t<decltype(l)>;
            if constexpr (std::is_same_v<L, DenseLayer>) {
                DenseLayer out;
                out.weights = precision_cast(l.weights, target);
                if (l.bias) out.bias = precision_cast(*l.bias, target);
                return Layer{std::move(out)};
            } else if constexpr (std::is_same_v<L, Conv2dLayer>) {
                Conv2dLayer out = l;
                out.kernels = precision_cast(l.kernels, target);
                if (l.bias) out.bias = precision_cast(*l.bias, target);
                return Layer{std::move(out)};
            } else if constexpr (std::is_same_v<L, ResidualLayer>) {
                ResidualLayer out;
                for (const Layer& inner : l.inner) out.inner.push_back(cast_layer(inner, target));
                return Layer{std::move(out)};
            } else {
                return Layer{l};
            }
        },
        layer.kind);
}

}  // namespace

std::vector<Tensor> relu_preactivations(const Model& model, const Tensor& a) {
    if (a.shape() != model.input_shape())
        throw std::invalid_argument("relu_preactivations: input shape mismatch");
    if (a.precision() != model.precision())
        throw std::invalid_argument("relu_preactivations: precision mismatch");
    if (model.precision() == Precision::f32)
        return relu_preactivations_impl<float>(model, a);
    return relu_preactivations_impl<double>(model, a);
}

Model precision_cast_model(const Model& model, Precision target) {
    if (target == model.precision()) return model;
    std::vector<Layer> layers;
    layers.reserve(model.layer_count());
    for (const Layer& layer : model.layers()) layers.push_back(cast_layer(layer, target));
    return Model(model.input_shape(), std::move(layers), target, model.init_seed(),
                 model.group_ends());
}

}  // namespace reprobe
