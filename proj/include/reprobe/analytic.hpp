#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "reprobe/layers.hpp"
#include "reprobe/tensor.hpp"

namespace reprobe {

// Bias-and-weights-only stack of square layers; every transformation is
// o = Wx + b, so layers can be solved exactly from the last one backwards.
struct LinearModel {
    std::vector<Tensor> weights;  // each [width, width]
    std::vector<Tensor> biases;   // each [width]
    std::size_t width = 0;
    Precision precision = Precision::f64;
};

LinearModel build_linear_model(std::size_t width, std::size_t depth, SeededRng& rng,
                               Precision prec = Precision::f64);

LinearModel precision_cast_linear(const LinearModel& model, Precision target);

Tensor linear_forward(const LinearModel& model, const Tensor& x);

class SingularMatrixError : public std::runtime_error {
public:
    SingularMatrixError(std::size_t layer, const std::string& what)
        : std::runtime_error(what), layer_(layer) {}
    std::size_t layer() const { return layer_; }

private:
    std::size_t layer_;
};

struct LinearInverseResult {
    Tensor x;
    std::string warning;  // non-empty when solved at 32-bit
};

// Solves x = W^-1 (o - b) layer by layer from the last layer to the first
// via LU with partial pivoting. Near-singular pivots raise
// SingularMatrixError naming the offending layer.
LinearInverseResult invert_linear(const LinearModel& model, const Tensor& o);

struct ConditioningRow {
    std::uint64_t seed;
    double dist_a_app;  // |a - a''| where O(a'') = O(a) + N(0, sigma_out)
    double dist_a_ap;   // |a - a'|  where a' = a + N(0, sigma_in)
    double ratio;
};

struct ConditioningResult {
    std::vector<ConditioningRow> rows;
    double median_ratio = 0.0;
};

// How far the exact preimage of a slightly shifted output lands from the
// original input, normalized by an equally slight input shift.
ConditioningResult conditioning_probe(const LinearModel& model, const Tensor& a,
                                      double sigma_out, double sigma_in,
                                      const std::vector<std::uint64_t>& seeds);

struct CapacityQuery {
    std::size_t input_elems = 1;    // m
    double zero_probability = 0.5;  // p, in (0, 1]
    std::size_t depth = 0;          // n
};

// ceil(m * (1/p)^n): neurons layer n needs so that zeroed units do not
// destroy input information.
std::size_t relu_capacity(const CapacityQuery& q);

// Empirical fraction of pre-activation values <= 0 per ReLU layer over the
// input set; empty when the model has no ReLU layers.
std::vector<double> estimate_zero_fraction(const Model& model,
                                           const std::vector<Tensor>& inputs);

}  // namespace reprobe
