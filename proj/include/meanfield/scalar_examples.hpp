#pragma once

// Closed-form and root-finding solvers for the worked fixed-point examples
// with drift = control and quadratic control cost, reporting the MFG and MKV
// answers side by side.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <vector>

#include "meanfield/lq_model.hpp"
#include "meanfield/math_util.hpp"
#include "meanfield/time_grid.hpp"

namespace meanfield {

enum class LimitMode { mfg, mkv };

inline const char* to_string(LimitMode m) { return m == LimitMode::mfg ? "mfg" : "mkv"; }

enum class Existence { unique, multiple, none, continuum };

inline const char* to_string(Existence e) {
    switch (e) {
        case Existence::unique: return "unique";
        case Existence::multiple: return "multiple";
        case Existence::none: return "none";
        case Existence::continuum: return "continuum";
    }
    return "?";
}

struct FixedPointReport {
    LimitMode mode = LimitMode::mfg;
    std::vector<double> roots;  // sorted ascending
    Existence existence = Existence::none;
    double solvability_margin = std::numeric_limits<double>::quiet_NaN();
    bool double_root = false;
};

namespace detail {
inline void require_horizon(double T) {
    if (!(T > 0.0)) throw std::invalid_argument("scalar example: horizon must be positive");
}

inline FixedPointReport from_roots(LimitMode mode, std::vector<double> roots, double margin) {
    FixedPointReport rep;
    rep.mode = mode;
    std::sort(roots.begin(), roots.end());
    rep.roots = std::move(roots);
    rep.existence = rep.roots.empty()
                        ? Existence::none
                        : (rep.roots.size() == 1 ? Existence::unique : Existence::multiple);
    rep.solvability_margin = margin;
    return rep;
}
}  // namespace detail

// Terminal cost g(x, mu) = r*x*mu. Mean fixed point: (1+rT) mu_T = x0 (MFG),
// (1+2rT) mu_T = x0 (MKV); a vanishing denominator leaves no fixed point
// unless x0 = 0, in which case every value works.
inline FixedPointReport linear_terminal(double r, double T, double x0, LimitMode mode) {
    detail::require_horizon(T);
    const double denom = 1.0 + (mode == LimitMode::mfg ? 1.0 : 2.0) * r * T;
    FixedPointReport rep;
    rep.mode = mode;
    rep.solvability_margin = denom;
    if (denom == 0.0) {
        rep.existence = (x0 == 0.0) ? Existence::continuum : Existence::none;
        return rep;
    }
    rep.roots = {x0 / denom};
    rep.existence = Existence::unique;
    return rep;
}

// Terminal cost g(x, mu) = r*x*mu^2. Mean fixed point: rT mu^2 + mu - x0 = 0
// (MFG), 3rT mu^2 + mu - x0 = 0 (MKV); margins 1+4rTx0 and 1+12rTx0.
inline FixedPointReport quadratic_terminal(double r, double T, double x0, LimitMode mode) {
    detail::require_horizon(T);
    const double lead = (mode == LimitMode::mfg ? 1.0 : 3.0) * r * T;
    const double margin = 1.0 + 4.0 * lead * x0;
    const QuadraticRoots qr = solve_quadratic(lead, 1.0, -x0);
    std::vector<double> roots;
    if (qr.count >= 1) roots.push_back(qr.r1);
    if (qr.count == 2) roots.push_back(qr.r2);
    FixedPointReport rep = detail::from_roots(mode, std::move(roots), margin);
    rep.double_root = qr.double_root;
    return rep;
}

namespace detail {
// Sign-scan + bisection over an auto-expanding bracket centered per the
// examples' scale; doubling stops at half-width 2^20.
inline FixedPointReport solve_mean_equation(LimitMode mode,
                                            const std::function<double(double)>& F, double x0) {
    double half = std::abs(x0) + 1.0;
    std::vector<double> roots;
    while (true) {
        roots = scan_roots(F, -half, half, 4096, 1e-12);
        if (!roots.empty() || half >= 1048576.0) break;
        half *= 2.0;
    }
    // Deduplicate bisection hits from adjacent scan cells.
    std::sort(roots.begin(), roots.end());
    roots.erase(std::unique(roots.begin(), roots.end(),
                            [](double a, double b) { return std::abs(a - b) < 1e-10; }),
                roots.end());
    return from_roots(mode, std::move(roots),
                      std::numeric_limits<double>::quiet_NaN());
}
}  // namespace detail

// Terminal cost g(x, mu) = x * gamma(mu). Mean fixed point:
//   MFG:  mu = x0 - T gamma(mu)
//   MKV:  mu = x0 - T (gamma'(mu) mu + gamma(mu))
inline FixedPointReport general_linear_terminal(const std::function<double(double)>& gamma,
                                                const std::function<double(double)>& gamma_prime,
                                                double T, double x0, LimitMode mode) {
    detail::require_horizon(T);
    auto F = [&](double u) {
        if (mode == LimitMode::mfg) return u - x0 + T * gamma(u);
        return u - x0 + T * (gamma_prime(u) * u + gamma(u));
    };
    return detail::solve_mean_equation(mode, F, x0);
}

// Terminal cost g(x, mu) = x^2 * gamma(mu), MFG only: mu (1 + 2T gamma(mu)) = x0.
// The MKV side is not reducible to an equation for the mean alone.
inline FixedPointReport quadratic_cost_mfg(const std::function<double(double)>& gamma, double T,
                                           double x0, LimitMode mode = LimitMode::mfg) {
    detail::require_horizon(T);
    if (mode != LimitMode::mfg)
        throw std::invalid_argument(
            "quadratic_cost_mfg: the MKV mean cannot be solved for first with a quadratic "
            "terminal cost");
    auto F = [&](double u) { return u * (1.0 + 2.0 * T * gamma(u)) - x0; };
    return detail::solve_mean_equation(mode, F, x0);
}

// Running cost f = alpha^2/2 + x*mu, zero terminal cost. The mean solves a
// second-order ODE with cosh solution; the MKV rate is sqrt(2).
inline double additive_running_mean(double T, double x0, LimitMode mode, double t) {
    detail::require_horizon(T);
    if (t < 0.0 || t > T)
        throw std::domain_error("additive_running_mean: t outside [0,T]");
    const double rate = mode == LimitMode::mfg ? 1.0 : std::sqrt(2.0);
    return x0 * std::cosh(rate * (T - t)) / std::cosh(rate * T);
}

// Running cost f = alpha^2/2 + (x-mu)^2/2, zero terminal cost: the adjoint
// mean vanishes, so the optimal mean is constant in both limits.
inline MeanFlow lq_zero_terminal_mean(const TimeGrid& grid, double x0, LimitMode /*mode*/) {
    return MeanFlow(grid, x0);
}

}  // namespace meanfield
