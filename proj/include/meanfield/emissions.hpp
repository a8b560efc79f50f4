#pragma once

// Emissions-regulation game: quadratic abatement cost, zero BAU drift, and a
// capped terminal penalty coupling the firms through the mean emissions. In
// the abatement regime the Hopf-Cole transform u = exp(-v/sigma^2) linearizes
// the HJB equation, so the value function, its slope (the optimal abatement
// rate) and the cap-exceedance probability all come out in closed form through
// the Gaussian CDF. Everything is evaluated in log space; the two Phi terms
// can differ by hundreds of orders of magnitude.

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

#include "meanfield/math_util.hpp"
#include "meanfield/rng.hpp"

namespace meanfield {

struct EmissionsModel {
    double lambda;  // terminal penalty per unit over the cap
    double cap;     // allowance per firm
    double sigma;
    double horizon;
    double x0;  // initial perceived emissions

    EmissionsModel(double lambda_, double cap_, double sigma_, double horizon_, double x0_)
        : lambda(lambda_), cap(cap_), sigma(sigma_), horizon(horizon_), x0(x0_) {
        if (!(lambda > 0.0)) throw std::invalid_argument("EmissionsModel: lambda must be > 0");
        if (!(sigma > 0.0)) throw std::invalid_argument("EmissionsModel: sigma must be > 0");
        if (!(horizon > 0.0)) throw std::invalid_argument("EmissionsModel: horizon must be > 0");
    }

    double delta() const { return x0 - cap - lambda * horizon / 2.0; }
};

enum class EmissionsRegime { bau, abatement, critical };

inline const char* to_string(EmissionsRegime r) {
    switch (r) {
        case EmissionsRegime::bau: return "bau";
        case EmissionsRegime::abatement: return "abatement";
        case EmissionsRegime::critical: return "critical";
    }
    return "?";
}

struct RegimeReport {
    EmissionsRegime regime = EmissionsRegime::bau;
    double prob_exceed = 0.0;
    double mean_T = 0.0;
    bool fixed_point_ok = false;
    double delta = 0.0;
    bool singular = false;  // terminal mean within tolerance of the cap
};

namespace detail {
// log of u(t,x) = E[exp(-lambda sigma^-2 (Y - cap)^+)], Y ~ N(x, sigma^2 (T-t)):
// log-sum-exp of the below-cap mass and the tilted above-cap mass.
inline double emissions_log_u(const EmissionsModel& em, double t, double x) {
    const double s = em.sigma * std::sqrt(em.horizon - t);
    const double k = em.lambda / (em.sigma * em.sigma);
    const double below = log_norm_cdf((em.cap - x) / s);
    const double above =
        0.5 * k * k * s * s - k * (x - em.cap) + log_norm_cdf((x - em.cap - k * s * s) / s);
    return log_sum_exp(below, above);
}
}  // namespace detail

// Value function of the abatement regime (terminal cost lambda*(x-cap)^+).
inline double value_function(const EmissionsModel& em, double t, double x) {
    if (t < 0.0 || t > em.horizon)
        throw std::domain_error("value_function: t outside [0,T]");
    if (t == em.horizon) return em.lambda * std::max(x - em.cap, 0.0);
    return -em.sigma * em.sigma * detail::emissions_log_u(em, t, x);
}

// Optimal abatement rate = d/dx value_function; lies in [0, lambda].
inline double optimal_feedback(const EmissionsModel& em, double t, double x) {
    if (t < 0.0 || t > em.horizon)
        throw std::domain_error("optimal_feedback: t outside [0,T]");
    if (t == em.horizon) return x > em.cap ? em.lambda : 0.0;
    const double s = em.sigma * std::sqrt(em.horizon - t);
    const double k = em.lambda / (em.sigma * em.sigma);
    const double below = log_norm_cdf((em.cap - x) / s);
    const double above =
        0.5 * k * k * s * s - k * (x - em.cap) + log_norm_cdf((x - em.cap - k * s * s) / s);
    return em.lambda * logistic(above - below);
}

// Exact P{x_T > cap} of the optimally abated state (abatement-regime terminal
// data), with delta = x0 - cap - lambda*T/2. Equals 1/2 exactly at delta = 0.
inline double prob_exceed_cap(const EmissionsModel& em) {
    const double d = em.delta();
    const double root_t = em.sigma * std::sqrt(em.horizon);
    const double z_num = (-em.lambda * em.horizon / 2.0 + d) / root_t;
    const double z_den = (-em.lambda * em.horizon / 2.0 - d) / root_t;
    const double log_ratio = -em.lambda / (em.sigma * em.sigma) * d + log_norm_cdf(z_num) -
                             log_norm_cdf(z_den);
    return logistic(log_ratio);
}

// Regime taxonomy: BAU when the cap is slack from the start; abatement is
// guaranteed when even maximal abatement cannot push the mean below the cap;
// in between the matching condition E{x_T} = x0 - lambda*T*P{x_T > cap} must
// be checked for self-consistency. A terminal mean within 1e-6 of the cap is
// flagged singular and never resolved.
inline RegimeReport classify_regime(const EmissionsModel& em) {
    RegimeReport rep;
    rep.delta = em.delta();
    if (em.x0 <= em.cap) {
        rep.regime = EmissionsRegime::bau;
        rep.prob_exceed = norm_cdf((em.x0 - em.cap) / (em.sigma * std::sqrt(em.horizon)));
        rep.mean_T = em.x0;  // zero feedback
        rep.fixed_point_ok = true;
        return rep;
    }
    rep.prob_exceed = prob_exceed_cap(em);
    rep.mean_T = em.x0 - em.lambda * em.horizon * rep.prob_exceed;
    rep.singular = std::abs(rep.mean_T - em.cap) < 1e-6;
    if (em.x0 > em.cap + em.lambda * em.horizon) {
        rep.regime = EmissionsRegime::abatement;
        rep.fixed_point_ok = true;
        return rep;
    }
    rep.regime = EmissionsRegime::critical;
    rep.fixed_point_ok = !rep.singular && rep.mean_T > em.cap;
    return rep;
}

struct EmissionsSimulation {
    double prob_exceed = 0.0;
    double prob_se = 0.0;
    double mean_T = 0.0;
    double mean_se = 0.0;
    int n_paths = 0;
    int n_steps = 0;
    std::uint64_t seed = 0;
};

inline constexpr int kEmissionsSimSteps = 400;

// Euler-Maruyama under the closed-form feedback (or none), one counter-based
// stream per path so estimates are independent of scheduling.
inline EmissionsSimulation simulate_emissions(const EmissionsModel& em, int n_paths,
                                              std::uint64_t seed, bool zero_feedback = false) {
    if (n_paths < 1000)
        throw std::invalid_argument("simulate_emissions: need at least 1000 paths");
    const int n = kEmissionsSimSteps;
    const double dt = em.horizon / n;
    const double root_dt = std::sqrt(dt);

    double sum = 0.0, sum_sq = 0.0;
    long exceed = 0;
    for (int p = 0; p < n_paths; ++p) {
        const std::uint64_t key = stream_key(seed, static_cast<std::uint64_t>(p));
        double x = em.x0;
        for (int k = 0; k < n; ++k) {
            const double drift = zero_feedback ? 0.0 : -optimal_feedback(em, k * dt, x);
            x += drift * dt + em.sigma * root_dt * counter_gaussian(key, k);
        }
        sum += x;
        sum_sq += x * x;
        if (x > em.cap) ++exceed;
    }
    EmissionsSimulation out;
    out.n_paths = n_paths;
    out.n_steps = n;
    out.seed = seed;
    out.mean_T = sum / n_paths;
    const double var = std::max(0.0, sum_sq / n_paths - out.mean_T * out.mean_T);
    out.mean_se = std::sqrt(var / n_paths);
    out.prob_exceed = static_cast<double>(exceed) / n_paths;
    out.prob_se = std::sqrt(out.prob_exceed * (1.0 - out.prob_exceed) / n_paths);
    return out;
}

}  // namespace meanfield
