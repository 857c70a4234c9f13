#include "reprobe/inversion.hpp"

#include <cmath>
#include <limits>

#include "reprobe/autodiff.hpp"

namespace reprobe {

InversionResult invert(const Model& model, const Tensor& target_a,
                       const InversionConfig& cfg) {
    if (cfg.iterations < 1) throw std::invalid_argument("invert: iterations must be >= 1");
    if (cfg.epsilon.c <= 0) throw std::invalid_argument("invert: epsilon constant must be > 0");
    if (cfg.blur.enabled &&
        (cfg.blur.sigma_end <= 0 || cfg.blur.sigma_start < cfg.blur.sigma_end))
        throw std::invalid_argument("invert: blur schedule needs sigma_start >= sigma_end > 0");
    if (target_a.shape() != model.input_shape())
        throw std::invalid_argument("invert: target shape does not match model input");
    if (cfg.precision != model.precision())
        throw std::invalid_argument("invert: config precision differs from model precision");
    if (cfg.blur.enabled && model.input_shape().size() != 3)
        throw std::invalid_argument("invert: blur needs a [C,H,W] input");

    const Tensor y_hat = forward_to_layer(model, target_a, cfg.layer);

    SeededRng init_rng = SeededRng(cfg.seed).split(rng_stream::kInputInit);
    Tensor a_n = gaussian_draw(init_rng, model.input_shape(), cfg.init.mu, cfg.init.sigma,
                               model.precision());
    if (cfg.clamp_input) a_n.clamp_in_place(0.0, 1.0);

    InversionResult result;
    result.trace.reserve(cfg.iterations + 1);
    const std::size_t f = cfg.iterations;
    for (std::size_t n = 0; n < f; ++n) {
        const InputGradientEval eval = input_gradient_eval(model, cfg.layer, a_n, y_hat);
        if (!std::isfinite(eval.l1_value))
            throw DivergenceError(n, "inversion diverged at iteration " + std::to_string(n) +
                                         ": objective is not finite");
        result.trace.push_back({n, eval.l1_value, l2_distance(eval.output, y_hat),
                                l2_distance(a_n, target_a)});
        a_n.axpy(-cfg.epsilon.at(n, f), eval.gradient);
        if (cfg.blur.enabled) a_n = blur(a_n, cfg.blur.sigma_at(n, f));
        if (cfg.clamp_input) a_n.clamp_in_place(0.0, 1.0);
    }
    const Tensor y_final = forward_to_layer(model, a_n, cfg.layer);
    const double l1_final = l1_sum(subtract(y_final, y_hat));
    if (!std::isfinite(l1_final))
        throw DivergenceError(f, "inversion diverged at iteration " + std::to_string(f) +
                                     ": objective is not finite");
    result.trace.push_back({f, l1_final, l2_distance(y_final, y_hat),
                            l2_distance(a_n, target_a)});
    result.a_g = std::move(a_n);
    return result;
}

Tensor shifted_input(const Tensor& a, double sigma, std::uint64_t seed) {
    if (sigma < 0) throw std::invalid_argument("shifted_input: sigma must be >= 0");
    SeededRng rng = SeededRng(seed).split(rng_stream::kShiftNoise);
    Tensor noise = gaussian_draw(rng, a.shape(), 0.0, sigma, a.precision());
    return add(a, noise);
}

MetricsRecord compute_metrics(const Model& model, std::size_t l, const Tensor& a,
                              const Tensor& a_g, double sigma_ref, std::uint64_t seed) {
    const Tensor y_a = forward_to_layer(model, a, l);
    const Tensor y_g = forward_to_layer(model, a_g, l);
    const Tensor a_prime = shifted_input(a, sigma_ref, seed);
    const Tensor y_prime = forward_to_layer(model, a_prime, l);
    MetricsRecord rec;
    rec.m_g = l2_distance(y_g, y_a);
    rec.m_s = l2_distance(y_prime, y_a);
    rec.m_i = l2_distance(a, a_g);
    rec.seed = seed;
    rec.layer = l;
    return rec;
}

LineSearchResult epsilon_line_search(const Model& model, const Tensor& target_a,
                                     InversionConfig cfg_template, std::size_t candidates,
                                     std::uint64_t seed, double c_lo, double c_hi,
                                     std::size_t f_search) {
    if (candidates < 1)
        throw std::invalid_argument("epsilon_line_search: need at least one candidate");
    if (!(c_lo > 0) || c_hi < c_lo)
        throw std::invalid_argument("epsilon_line_search: bad candidate range");
    SeededRng rng = SeededRng(seed).split(rng_stream::kLineSearch);
    LineSearchResult result;
    result.best_m_g = std::numeric_limits<double>::infinity();
    cfg_template.iterations = f_search;
    const double log_lo = std::log(c_lo), log_hi = std::log(c_hi);
    for (std::size_t i = 0; i < candidates; ++i) {
        const double c = std::exp(log_lo + (log_hi - log_lo) * rng.next_uniform());
        InversionConfig cfg = cfg_template;
        cfg.epsilon.c = c;
        EpsilonCandidate cand{c, std::numeric_limits<double>::quiet_NaN(), false};
        try {
            const InversionResult run = invert(model, target_a, cfg);
            cand.final_m_g = run.trace.back().m_g;
            if (cand.final_m_g < result.best_m_g) {
                result.best_m_g = cand.final_m_g;
                result.best_c = c;
            }
        } catch (const DivergenceError&) {
            cand.diverged = true;
        }
        result.candidates.push_back(cand);
    }
    if (!std::isfinite(result.best_m_g)) {
        std::string tried;
        for (const auto& cand : result.candidates)
            tried += (tried.empty() ? "" : ", ") + std::to_string(cand.c);
        throw std::runtime_error("epsilon_line_search: every candidate diverged (tried " +
                                 tried + ")");
    }
    return result;
}

}  // namespace reprobe
