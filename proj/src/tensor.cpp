#include "reprobe/tensor.hpp"

#include <cmath>
#include <cstddef>
#include <stdexcept>

namespace reprobe {

std::string precision_name(Precision p) {
    return p == Precision::f32 ? "32" : "64";
}

Precision precision_from_bits(int bits) {
    if (bits == 32) return Precision::f32;
    if (bits == 64) return Precision::f64;
    throw std::invalid_argument("precision must be 32 or 64, got " + std::to_string(bits));
}

int precision_bits(Precision p) {
    return p == Precision::f32 ? 32 : 64;
}

std::size_t shape_elems(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return n;
}

namespace {

void check_shape(const std::vector<std::size_t>& shape) {
    if (shape.empty()) throw std::invalid_argument("tensor shape must have at least one dimension");
    for (std::size_t d : shape) {
        if (d == 0) throw std::invalid_argument("tensor dimensions must be positive");
    }
}

void check_same(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape())
        throw std::invalid_argument(std::string(op) + ": shape mismatch");
    if (a.precision() != b.precision())
        throw std::invalid_argument(std::string(op) + ": precision mismatch");
}

template <typename T, typename F>
Tensor elementwise(const Tensor& a, const Tensor& b, F f) {
    Tensor out(a.shape(), a.precision());
    auto pa = a.data<T>();
    auto pb = b.data<T>();
    auto po = out.data<T>();
    for (std::size_t i = 0; i < pa.size(); ++i) po[i] = f(pa[i], pb[i]);
    return out;
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape, Precision prec)
    : shape_(std::move(shape)), prec_(prec) {
    check_shape(shape_);
    size_ = shape_elems(shape_);
    if (prec_ == Precision::f32)
        f32_.assign(size_, 0.0f);
    else
        f64_.assign(size_, 0.0);
}

Tensor Tensor::zeros(std::vector<std::size_t> shape, Precision prec) {
    return Tensor(std::move(shape), prec);
}

Tensor Tensor::full(std::vector<std::size_t> shape, double value, Precision prec) {
    Tensor t(std::move(shape), prec);
    t.fill(value);
    return t;
}

Tensor Tensor::from_values(std::vector<std::size_t> shape,
                           const std::vector<double>& values, Precision prec) {
    Tensor t(std::move(shape), prec);
    if (values.size() != t.size())
        throw std::invalid_argument("from_values: value count does not match shape");
    for (std::size_t i = 0; i < values.size(); ++i) t.set(i, values[i]);
    return t;
}

double Tensor::at(std::size_t i) const {
    return prec_ == Precision::f32 ? static_cast<double>(f32_[i]) : f64_[i];
}

void Tensor::set(std::size_t i, double v) {
    if (prec_ == Precision::f32)
        f32_[i] = static_cast<float>(v);
    else
        f64_[i] = v;
}

std::vector<double> Tensor::to_values() const {
    std::vector<double> out(size_);
    for (std::size_t i = 0; i < size_; ++i) out[i] = at(i);
    return out;
}

bool Tensor::all_finite() const {
    if (prec_ == Precision::f32) {
        for (float v : f32_)
            if (!std::isfinite(v)) return false;
    } else {
        for (double v : f64_)
            if (!std::isfinite(v)) return false;
    }
    return true;
}

void Tensor::axpy(double alpha, const Tensor& x) {
    check_same(*this, x, "axpy");
    if (prec_ == Precision::f32) {
        const float a = static_cast<float>(alpha);
        auto px = x.data<float>();
        for (std::size_t i = 0; i < f32_.size(); ++i) f32_[i] += a * px[i];
    } else {
        auto px = x.data<double>();
        for (std::size_t i = 0; i < f64_.size(); ++i) f64_[i] += alpha * px[i];
    }
}

void Tensor::clamp_in_place(double lo, double hi) {
    if (prec_ == Precision::f32) {
        const float l = static_cast<float>(lo), h = static_cast<float>(hi);
        for (float& v : f32_) v = v < l ? l : (v > h ? h : v);
    } else {
        for (double& v : f64_) v = v < lo ? lo : (v > hi ? hi : v);
    }
}

void Tensor::fill(double v) {
    if (prec_ == Precision::f32)
        f32_.assign(size_, static_cast<float>(v));
    else
        f64_.assign(size_, v);
}

Tensor add(const Tensor& a, const Tensor& b) {
    check_same(a, b, "add");
    if (a.precision() == Precision::f32)
        return elementwise<float>(a, b, [](float x, float y) { return x + y; });
    return elementwise<double>(a, b, [](double x, double y) { return x + y; });
}

Tensor subtract(const Tensor& a, const Tensor& b) {
    check_same(a, b, "subtract");
    if (a.precision() == Precision::f32)
        return elementwise<float>(a, b, [](float x, float y) { return x - y; });
    return elementwise<double>(a, b, [](double x, double y) { return x - y; });
}

Tensor scalar_multiply(const Tensor& a, double s) {
    Tensor out(a.shape(), a.precision());
    if (a.precision() == Precision::f32) {
        const float fs = static_cast<float>(s);
        auto pa = a.data<float>();
        auto po = out.data<float>();
        for (std::size_t i = 0; i < pa.size(); ++i) po[i] = fs * pa[i];
    } else {
        auto pa = a.data<double>();
        auto po = out.data<double>();
        for (std::size_t i = 0; i < pa.size(); ++i) po[i] = s * pa[i];
    }
    return out;
}

Tensor clamp(const Tensor& a, double lo, double hi) {
    if (lo > hi) throw std::invalid_argument("clamp: lo > hi");
    Tensor out = a;
    out.clamp_in_place(lo, hi);
    return out;
}

Tensor reshape(const Tensor& a, std::vector<std::size_t> new_shape) {
    check_shape(new_shape);
    if (shape_elems(new_shape) != a.size())
        throw std::invalid_argument("reshape: element count mismatch");
    Tensor out = a;
    // Row-major layout: only the shape header changes.
    Tensor reshaped(std::move(new_shape), a.precision());
    if (a.precision() == Precision::f32) {
        auto src = out.data<float>();
        auto dst = reshaped.data<float>();
        for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i];
    } else {
        auto src = out.data<double>();
        auto dst = reshaped.data<double>();
        for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i];
    }
    return reshaped;
}

Tensor precision_cast(const Tensor& a, Precision target) {
    if (a.precision() == target) return a;
    Tensor out(a.shape(), target);
    for (std::size_t i = 0; i < a.size(); ++i) out.set(i, a.at(i));
    return out;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2)
        throw std::invalid_argument("matmul: both operands must be rank-2");
    if (a.shape()[1] != b.shape()[0])
        throw std::invalid_argument("matmul: inner dimensions differ");
    if (a.precision() != b.precision())
        throw std::invalid_argument("matmul: precision mismatch");
    const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
    Tensor out({m, n}, a.precision());
    auto run = [&](auto tag) {
        using T = decltype(tag);
        auto pa = a.data<T>();
        auto pb = b.data<T>();
        auto po = out.data<T>();
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t p = 0; p < k; ++p) {
                const T av = pa[i * k + p];
                for (std::size_t j = 0; j < n; ++j) po[i * n + j] += av * pb[p * n + j];
            }
        }
    };
    if (a.precision() == Precision::f32)
        run(float{});
    else
        run(double{});
    return out;
}

double l1_sum(const Tensor& a) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += std::abs(a.at(i));
    return acc;
}

double l2_norm(const Tensor& a) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double v = a.at(i);
        acc += v * v;
    }
    return std::sqrt(acc);
}

double l2_distance(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) throw std::invalid_argument("l2_distance: shape mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double v = a.at(i) - b.at(i);
        acc += v * v;
    }
    return std::sqrt(acc);
}

Tensor gaussian_draw(SeededRng& rng, std::vector<std::size_t> shape,
                     double mu, double sigma, Precision prec) {
    if (sigma < 0) throw std::invalid_argument("gaussian_draw: sigma must be >= 0");
    Tensor out(std::move(shape), prec);
    for (std::size_t i = 0; i < out.size(); ++i)
        out.set(i, mu + sigma * rng.next_gaussian());
    return out;
}

Tensor gaussian_kernel_3x3(double sigma, Precision prec) {
    if (sigma <= 0) throw std::invalid_argument("gaussian_kernel_3x3: sigma must be > 0");
    double w[9];
    double total = 0.0;
    for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
            const double v = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
            w[(dy + 1) * 3 + (dx + 1)] = v;
            total += v;
        }
    }
    Tensor out({3, 3}, prec);
    for (int i = 0; i < 9; ++i) out.set(i, w[i] / total);
    return out;
}

Tensor blur(const Tensor& image, double sigma) {
    if (image.rank() != 3)
        throw std::invalid_argument("blur: expected a [C,H,W] tensor");
    const Tensor kernel = gaussian_kernel_3x3(sigma, image.precision());
    const std::size_t channels = image.shape()[0];
    const std::size_t height = image.shape()[1];
    const std::size_t width = image.shape()[2];
    Tensor out(image.shape(), image.precision());
    auto run = [&](auto tag) {
        using T = decltype(tag);
        auto src = image.data<T>();
        auto dst = out.data<T>();
        auto kw = kernel.data<T>();
        for (std::size_t c = 0; c < channels; ++c) {
            const T* plane = src.data() + c * height * width;
            T* oplane = dst.data() + c * height * width;
            for (std::size_t y = 0; y < height; ++y) {
                for (std::size_t x = 0; x < width; ++x) {
                    T acc = 0;
                    for (int dy = -1; dy <= 1; ++dy) {
                        for (int dx = -1; dx <= 1; ++dx) {
                            // replicate padding
                            long sy = static_cast<long>(y) + dy;
                            long sx = static_cast<long>(x) + dx;
                            if (sy < 0) sy = 0;
                            if (sy >= static_cast<long>(height)) sy = height - 1;
                            if (sx < 0) sx = 0;
                            if (sx >= static_cast<long>(width)) sx = width - 1;
                            acc += kw[(dy + 1) * 3 + (dx + 1)] * plane[sy * width + sx];
                        }
                    }
                    oplane[y * width + x] = acc;
                }
            }
        }
    };
    if (image.precision() == Precision::f32)
        run(float{});
    else
        run(double{});
    return out;
}

Tensor bilinear_downsample(const Tensor& image, std::size_t out_h, std::size_t out_w) {
    if (image.rank() != 3)
        throw std::invalid_argument("bilinear_downsample: expected a [C,H,W] tensor");
    if (out_h == 0 || out_w == 0)
        throw std::invalid_argument("bilinear_downsample: output size must be positive");
    const std::size_t channels = image.shape()[0];
    const std::size_t height = image.shape()[1];
    const std::size_t width = image.shape()[2];
    Tensor out({channels, out_h, out_w}, image.precision());
    // Pixel-center sampling: output (i,j) reads source (i+0.5)*H/out_h-0.5.
    for (std::size_t c = 0; c < channels; ++c) {
        for (std::size_t i = 0; i < out_h; ++i) {
            double sy = (static_cast<double>(i) + 0.5) * static_cast<double>(height) /
                            static_cast<double>(out_h) - 0.5;
            if (sy < 0) sy = 0;
            if (sy > static_cast<double>(height - 1)) sy = static_cast<double>(height - 1);
            const std::size_t y0 = static_cast<std::size_t>(sy);
            const std::size_t y1 = y0 + 1 < height ? y0 + 1 : y0;
            const double fy = sy - static_cast<double>(y0);
            for (std::size_t j = 0; j < out_w; ++j) {
                double sx = (static_cast<double>(j) + 0.5) * static_cast<double>(width) /
                                static_cast<double>(out_w) - 0.5;
                if (sx < 0) sx = 0;
                if (sx > static_cast<double>(width - 1)) sx = static_cast<double>(width - 1);
                const std::size_t x0 = static_cast<std::size_t>(sx);
                const std::size_t x1 = x0 + 1 < width ? x0 + 1 : x0;
                const double fx = sx - static_cast<double>(x0);
                const std::size_t base = c * height * width;
                const double v00 = image.at(base + y0 * width + x0);
                const double v01 = image.at(base + y0 * width + x1);
                const double v10 = image.at(base + y1 * width + x0);
                const double v11 = image.at(base + y1 * width + x1);
                const double v = (1 - fy) * ((1 - fx) * v00 + fx * v01) +
                                 fy * ((1 - fx) * v10 + fx * v11);
                out.set((c * out_h + i) * out_w + j, v);
            }
        }
    }
    return out;
}

}  // namespace reprobe
