#include "reprobe/analytic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "reprobe/rng.hpp"

namespace reprobe {

namespace {

// LU factorization with partial pivoting; the pivot floor flags numerical
// singularity. 1e-12 matches the double-precision path; the float path uses
// a proportionally coarser floor.
template <typename T>
constexpr double pivot_threshold() {
    return std::is_same_v<T, double> ? 1e-12 : 1e-5;
}

template <typename T>
struct LuFactor {
    std::size_t n = 0;
    std::vector<T> lu;
    std::vector<std::size_t> perm;

    // Returns false when a pivot falls below the singularity floor.
    bool factor(const Tensor& matrix) {
        n = matrix.shape()[0];
        auto src = matrix.data<T>();
        lu.assign(src.begin(), src.end());
        perm.resize(n);
        for (std::size_t i = 0; i < n; ++i) perm[i] = i;
        for (std::size_t col = 0; col < n; ++col) {
            std::size_t pivot_row = col;
            T best = std::abs(lu[col * n + col]);
            for (std::size_t r = col + 1; r < n; ++r) {
                const T v = std::abs(lu[r * n + col]);
                if (v > best) {
                    best = v;
                    pivot_row = r;
                }
            }
            if (static_cast<double>(best) < pivot_threshold<T>()) return false;
            if (pivot_row != col) {
                for (std::size_t j = 0; j < n; ++j)
                    std::swap(lu[col * n + j], lu[pivot_row * n + j]);
                std::swap(perm[col], perm[pivot_row]);
            }
            const T pivot = lu[col * n + col];
            for (std::size_t r = col + 1; r < n; ++r) {
                const T factor = lu[r * n + col] / pivot;
                lu[r * n + col] = factor;
                for (std::size_t j = col + 1; j < n; ++j)
                    lu[r * n + j] -= factor * lu[col * n + j];
            }
        }
        return true;
    }

    void solve(const T* rhs, T* out) const {
        std::vector<T> y(n);
        for (std::size_t i = 0; i < n; ++i) {
            T acc = rhs[perm[i]];
            for (std::size_t j = 0; j < i; ++j) acc -= lu[i * n + j] * y[j];
            y[i] = acc;
        }
        for (std::size_t i = n; i-- > 0;) {
            T acc = y[i];
            for (std::size_t j = i + 1; j < n; ++j) acc -= lu[i * n + j] * out[j];
            out[i] = acc / lu[i * n + i];
        }
    }
};

template <typename T>
Tensor solve_layers(const LinearModel& model, const std::vector<LuFactor<T>>& factors,
                    const Tensor& o) {
    std::vector<T> cur(o.size());
    auto src = o.data<T>();
    for (std::size_t i = 0; i < cur.size(); ++i) cur[i] = src[i];
    std::vector<T> next(o.size());
    for (std::size_t layer = model.weights.size(); layer-- > 0;) {
        auto bias = model.biases[layer].data<T>();
        for (std::size_t i = 0; i < cur.size(); ++i) cur[i] -= bias[i];
        factors[layer].solve(cur.data(), next.data());
        cur.swap(next);
    }
    Tensor out({model.width}, model.precision);
    auto dst = out.data<T>();
    for (std::size_t i = 0; i < cur.size(); ++i) dst[i] = cur[i];
    return out;
}

template <typename T>
std::vector<LuFactor<T>> factor_all(const LinearModel& model) {
    std::vector<LuFactor<T>> factors(model.weights.size());
    for (std::size_t layer = 0; layer < model.weights.size(); ++layer) {
        if (!factors[layer].factor(model.weights[layer]))
            throw SingularMatrixError(
                layer + 1, "layer " + std::to_string(layer + 1) +
                               " weight matrix is numerically singular (pivot below " +
                               std::to_string(pivot_threshold<T>()) + ")");
    }
    return factors;
}

void check_linear(const LinearModel& model) {
    if (model.weights.empty() || model.weights.size() != model.biases.size())
        throw std::invalid_argument("linear model needs matching weight/bias lists");
    for (std::size_t i = 0; i < model.weights.size(); ++i) {
        if (model.weights[i].rank() != 2 || model.weights[i].shape()[0] != model.width ||
            model.weights[i].shape()[1] != model.width)
            throw std::invalid_argument("linear model weights must be width x width");
        if (model.biases[i].shape() != std::vector<std::size_t>{model.width})
            throw std::invalid_argument("linear model bias width mismatch");
    }
}

}  // namespace

LinearModel build_linear_model(std::size_t width, std::size_t depth, SeededRng& rng,
                               Precision prec) {
    if (width == 0 || depth == 0)
        throw std::invalid_argument("build_linear_model: width and depth must be positive");
    LinearModel model;
    model.width = width;
    model.precision = prec;
    const double bound = std::sqrt(6.0 / static_cast<double>(width));
    for (std::size_t d = 0; d < depth; ++d) {
        Tensor w({width, width}, prec);
        for (std::size_t i = 0; i < w.size(); ++i)
            w.set(i, bound * (2.0 * rng.next_uniform() - 1.0));
        model.weights.push_back(std::move(w));
        model.biases.push_back(Tensor::zeros({width}, prec));
    }
    return model;
}

LinearModel precision_cast_linear(const LinearModel& model, Precision target) {
    LinearModel out;
    out.width = model.width;
    out.precision = target;
    for (const Tensor& w : model.weights) out.weights.push_back(precision_cast(w, target));
    for (const Tensor& b : model.biases) out.biases.push_back(precision_cast(b, target));
    return out;
}

Tensor linear_forward(const LinearModel& model, const Tensor& x) {
    check_linear(model);
    if (x.shape() != std::vector<std::size_t>{model.width})
        throw std::invalid_argument("linear_forward: input width mismatch");
    Tensor cur = x;
    for (std::size_t layer = 0; layer < model.weights.size(); ++layer) {
        cur = add(reshape(matmul(model.weights[layer], reshape(cur, {model.width, 1})),
                          {model.width}),
                  model.biases[layer]);
    }
    return cur;
}

LinearInverseResult invert_linear(const LinearModel& model, const Tensor& o) {
    check_linear(model);
    if (o.shape() != std::vector<std::size_t>{model.width})
        throw std::invalid_argument("invert_linear: output width mismatch");
    if (o.precision() != model.precision)
        throw std::invalid_argument("invert_linear: precision mismatch");
    LinearInverseResult result;
    if (model.precision == Precision::f32) {
        result.warning = "inverted at 32-bit precision; exact layer inversion generally "
                         "requires 64-bit";
        const auto factors = factor_all<float>(model);
        result.x = solve_layers<float>(model, factors, o);
    } else {
        const auto factors = factor_all<double>(model);
        result.x = solve_layers<double>(model, factors, o);
    }
    return result;
}

ConditioningResult conditioning_probe(const LinearModel& model, const Tensor& a,
                                      double sigma_out, double sigma_in,
                                      const std::vector<std::uint64_t>& seeds) {
    check_linear(model);
    if (sigma_out <= 0 || sigma_in <= 0)
        throw std::invalid_argument("conditioning_probe: sigmas must be > 0");
    if (seeds.empty()) throw std::invalid_argument("conditioning_probe: need at least one seed");
    const Tensor o = linear_forward(model, a);
    ConditioningResult result;
    auto probe = [&]<typename T>(const std::vector<LuFactor<T>>& factors) {
        for (std::uint64_t seed : seeds) {
            SeededRng out_rng = SeededRng(seed).split(rng_stream::kOutputNoise);
            Tensor o_shift = add(o, gaussian_draw(out_rng, o.shape(), 0.0, sigma_out,
                                                  model.precision));
            Tensor a_dblprime = solve_layers<T>(model, factors, o_shift);
            const Tensor a_prime = [&] {
                SeededRng in_rng = SeededRng(seed).split(rng_stream::kShiftNoise);
                return add(a, gaussian_draw(in_rng, a.shape(), 0.0, sigma_in,
                                            model.precision));
            }();
            ConditioningRow row;
            row.seed = seed;
            row.dist_a_app = l2_distance(a, a_dblprime);
            row.dist_a_ap = l2_distance(a, a_prime);
            row.ratio = row.dist_a_app / row.dist_a_ap;
            result.rows.push_back(row);
        }
    };
    if (model.precision == Precision::f32)
        probe(factor_all<float>(model));
    else
        probe(factor_all<double>(model));
    std::vector<double> ratios;
    for (const auto& row : result.rows) ratios.push_back(row.ratio);
    std::sort(ratios.begin(), ratios.end());
    const std::size_t n = ratios.size();
    result.median_ratio = n % 2 == 1 ? ratios[n / 2]
                                     : 0.5 * (ratios[n / 2 - 1] + ratios[n / 2]);
    return result;
}

std::size_t relu_capacity(const CapacityQuery& q) {
    if (q.input_elems < 1) throw std::invalid_argument("relu_capacity: m must be >= 1");
    if (!(q.zero_probability > 0.0) || q.zero_probability > 1.0)
        throw std::invalid_argument("relu_capacity: p must lie in (0, 1]");
    long double value = static_cast<long double>(q.input_elems);
    const long double growth = 1.0L / static_cast<long double>(q.zero_probability);
    for (std::size_t i = 0; i < q.depth; ++i) {
        value *= growth;
        if (value > 9.2e18L)
            throw std::overflow_error("relu_capacity: result exceeds 64-bit range");
    }
    // absorb accumulated rounding before taking the ceiling
    return static_cast<std::size_t>(std::ceil(value - value * 1e-15L));
}

std::vector<double> estimate_zero_fraction(const Model& model,
                                           const std::vector<Tensor>& inputs) {
    if (inputs.empty())
        throw std::invalid_argument("estimate_zero_fraction: need at least one input");
    std::vector<std::size_t> zeroed;
    std::vector<std::size_t> total;
    for (const Tensor& input : inputs) {
        const std::vector<Tensor> pres = relu_preactivations(model, input);
        if (zeroed.empty()) {
            zeroed.assign(pres.size(), 0);
            total.assign(pres.size(), 0);
        }
        for (std::size_t k = 0; k < pres.size(); ++k) {
            for (std::size_t i = 0; i < pres[k].size(); ++i)
                if (pres[k].at(i) <= 0.0) ++zeroed[k];
            total[k] += pres[k].size();
        }
    }
    std::vector<double> fractions;
    for (std::size_t k = 0; k < zeroed.size(); ++k)
        fractions.push_back(static_cast<double>(zeroed[k]) / static_cast<double>(total[k]));
    return fractions;
}

}  // namespace reprobe
