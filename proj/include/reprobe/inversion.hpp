#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "reprobe/layers.hpp"
#include "reprobe/tensor.hpp"

namespace reprobe {

struct EpsilonSchedule {
    enum class Kind { Constant, LinearDecay };
    Kind kind = Kind::LinearDecay;
    double c = 0.1;

    static EpsilonSchedule constant(double c) { return {Kind::Constant, c}; }
    static EpsilonSchedule linear_decay(double c) { return {Kind::LinearDecay, c}; }

    // Step size at update n of f: constant c, or c * (1 - n/f).
    double at(std::size_t n, std::size_t f) const {
        if (kind == Kind::Constant) return c;
        return c * (1.0 - static_cast<double>(n) / static_cast<double>(f));
    }
};

struct BlurSchedule {
    bool enabled = false;
    double sigma_start = 2.4;
    double sigma_end = 0.4;

    static BlurSchedule off() { return {false, 0.0, 0.0}; }
    static BlurSchedule linear(double start = 2.4, double end = 0.4) {
        return {true, start, end};
    }

    // Kernel width at update n: start at sigma_start, reach sigma_end at the
    // final update.
    double sigma_at(std::size_t n, std::size_t f) const {
        if (f <= 1) return sigma_end;
        return sigma_start + (sigma_end - sigma_start) * static_cast<double>(n) /
                                 static_cast<double>(f - 1);
    }
};

struct InitSpec {
    double mu = 0.7;
    double sigma = 0.05;
};

struct InversionConfig {
    std::size_t layer = 1;
    std::size_t iterations = 100;
    EpsilonSchedule epsilon;
    BlurSchedule blur;
    InitSpec init;
    bool clamp_input = false;
    Precision precision = Precision::f32;
    std::uint64_t seed = 0;
};

struct TraceRow {
    std::size_t n;
    double l1_objective;
    double m_g;
    double m_i;
};

struct InversionResult {
    Tensor a_g;
    std::vector<TraceRow> trace;  // iterations + 1 rows, n = 0 first
};

class DivergenceError : public std::runtime_error {
public:
    DivergenceError(std::size_t iteration, const std::string& what)
        : std::runtime_error(what), iteration_(iteration) {}
    std::size_t iteration() const { return iteration_; }

private:
    std::size_t iteration_;
};

// Gradient-descends an initially random input until its layer-l embedding
// approaches that of target_a, recording (l1, m_g, m_i) per iteration.
InversionResult invert(const Model& model, const Tensor& target_a,
                       const InversionConfig& cfg);

// a + N(0, sigma) elementwise, drawn from the given seed's shift substream.
Tensor shifted_input(const Tensor& a, double sigma, std::uint64_t seed);

struct MetricsRecord {
    double m_g = 0.0;
    double m_s = 0.0;
    double m_i = 0.0;
    std::uint64_t seed = 0;
    std::size_t layer = 0;
};

// m_g = |O_l(a_g) - O_l(a)|_2, m_s = |O_l(a') - O_l(a)|_2 with
// a' = a + N(0, sigma_ref), m_i = |a - a_g|_2.
MetricsRecord compute_metrics(const Model& model, std::size_t l, const Tensor& a,
                              const Tensor& a_g, double sigma_ref, std::uint64_t seed);

struct EpsilonCandidate {
    double c;
    double final_m_g;
    bool diverged;
};

struct LineSearchResult {
    double best_c = 0.0;
    double best_m_g = 0.0;
    std::vector<EpsilonCandidate> candidates;
};

// Random log-uniform search over the constant c of the template's epsilon
// schedule; short pilot inversions of f_search iterations are scored by
// final m_g.
LineSearchResult epsilon_line_search(const Model& model, const Tensor& target_a,
                                     InversionConfig cfg_template, std::size_t candidates,
                                     std::uint64_t seed, double c_lo = 1e-4,
                                     double c_hi = 1.0, std::size_t f_search = 80);

}  // namespace reprobe
