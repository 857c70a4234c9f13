#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "reprobe/rng.hpp"

namespace reprobe {

enum class Precision { f32, f64 };

std::string precision_name(Precision p);
Precision precision_from_bits(int bits);
int precision_bits(Precision p);

// Dense row-major n-d array with an explicit scalar width. All arithmetic
// runs in the tensor's own precision; reductions accumulate in double.
class Tensor {
public:
    Tensor() = default;
    Tensor(std::vector<std::size_t> shape, Precision prec);

    static Tensor zeros(std::vector<std::size_t> shape, Precision prec);
    static Tensor full(std::vector<std::size_t> shape, double value, Precision prec);
    static Tensor from_values(std::vector<std::size_t> shape,
                              const std::vector<double>& values,
                              Precision prec = Precision::f64);

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t size() const { return size_; }
    bool empty() const { return size_ == 0; }
    Precision precision() const { return prec_; }

    double at(std::size_t i) const;
    void set(std::size_t i, double v);
    std::vector<double> to_values() const;

    template <typename T>
    std::span<T> data();
    template <typename T>
    std::span<const T> data() const;

    bool all_finite() const;

    // In-place helpers for hot loops: this += alpha * x, and box clipping.
    void axpy(double alpha, const Tensor& x);
    void clamp_in_place(double lo, double hi);
    void fill(double v);

private:
    std::vector<std::size_t> shape_;
    std::size_t size_ = 0;
    Precision prec_ = Precision::f64;
    std::vector<float> f32_;
    std::vector<double> f64_;
};

template <>
inline std::span<float> Tensor::data<float>() { return {f32_.data(), f32_.size()}; }
template <>
inline std::span<double> Tensor::data<double>() { return {f64_.data(), f64_.size()}; }
template <>
inline std::span<const float> Tensor::data<float>() const { return {f32_.data(), f32_.size()}; }
template <>
inline std::span<const double> Tensor::data<double>() const { return {f64_.data(), f64_.size()}; }

std::size_t shape_elems(const std::vector<std::size_t>& shape);

// Elementwise / structural operations. Binary ops require matching shape
// and precision.
Tensor add(const Tensor& a, const Tensor& b);
Tensor subtract(const Tensor& a, const Tensor& b);
Tensor scalar_multiply(const Tensor& a, double s);
Tensor clamp(const Tensor& a, double lo, double hi);
Tensor reshape(const Tensor& a, std::vector<std::size_t> new_shape);
Tensor precision_cast(const Tensor& a, Precision target);

// Rank-2 x rank-2 product: [m,k] x [k,n] -> [m,n].
Tensor matmul(const Tensor& a, const Tensor& b);

double l1_sum(const Tensor& a);
double l2_norm(const Tensor& a);
double l2_distance(const Tensor& a, const Tensor& b);

// Seeded normal tensor, mean mu and std sigma (sigma >= 0).
Tensor gaussian_draw(SeededRng& rng, std::vector<std::size_t> shape,
                     double mu, double sigma, Precision prec = Precision::f64);

// 3x3 kernel with entries proportional to exp(-(dx^2+dy^2)/(2 sigma^2)),
// normalized to sum exactly 1. sigma must be positive.
Tensor gaussian_kernel_3x3(double sigma, Precision prec = Precision::f64);

// Per-channel 3x3 Gaussian convolution of a [C,H,W] tensor with replicate
// padding at the borders.
Tensor blur(const Tensor& image, double sigma);

// Bilinear [C,H,W] -> [C,out_h,out_w] resampling at pixel centers.
Tensor bilinear_downsample(const Tensor& image, std::size_t out_h, std::size_t out_w);

}  // namespace reprobe
