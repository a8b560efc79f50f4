#pragma once

// Linear-quadratic mean field game: the equilibrium mean flow solves a
// deterministic forward-backward system which an exponential change of
// variable turns into a decoupleable symmetric one; the individual-player
// FBSDE is then decoupled by the Riccati pair and the equilibrium feedback
// read off the affine ansatz.

#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

#include "meanfield/cost.hpp"
#include "meanfield/lq_model.hpp"
#include "meanfield/policy.hpp"
#include "meanfield/riccati.hpp"

namespace meanfield {

struct MeanSystemSolution {
    MeanFlow mean;                  // fixed-point mean flow (MFG) / mean state (MKV)
    std::vector<double> adjoint;    // mean of the adjoint process
    std::vector<double> eta_bar;    // decoupling pair of the averaged system
    std::vector<double> chi_bar;
    std::optional<double> blow_up;

    bool ok() const { return !blow_up.has_value(); }
};

struct MFGSolution {
    MeanFlow mean_flow;
    std::vector<double> eta, chi;          // individual FBSDE decoupling
    std::vector<double> eta_bar, chi_bar;  // averaged-system decoupling
    FeedbackPolicy feedback;
    MomentPaths moments;
    double fixed_point_residual = std::numeric_limits<double>::quiet_NaN();
    double chi_cross_gap = 0.0;
    std::optional<double> blow_up;

    bool ok() const { return !blow_up.has_value(); }
};

namespace detail {

inline bool mfg_sign_hypotheses_hold(const LQModel& model) {
    return model.q * (model.q + model.qbar) >= 0.0 && model.min_running_aggregate() >= 0.0;
}

inline FeedbackPolicy feedback_from_ansatz(const LQModel& model, const std::vector<double>& eta,
                                           const std::vector<double>& chi) {
    const TimeGrid& g = model.grid;
    std::vector<double> slope(g.n_nodes()), intercept(g.n_nodes());
    for (int k = 0; k < g.n_nodes(); ++k) {
        const double gain = -model.b[k] / model.n[k];
        slope[k] = gain * eta[k];
        intercept[k] = gain * chi[k];
    }
    return FeedbackPolicy(Sampled(g, std::move(slope)), Sampled(g, std::move(intercept)));
}

}  // namespace detail

// Aggregated MFG system
//   mu' = (a+abar) mu - (b^2/n) ybar + beta,  ybar' = -(a ybar + m(m+mbar) mu),
//   ybar_T = q(q+qbar) mu_T.
// The substitution zeta = e*ybar with e_t = exp(-int_0^t abar) symmetrizes the
// system so the canonical Riccati decoupling applies; mu is then propagated
// forward and ybar recovered. Riccati blow-up means no fixed point on this
// horizon (possible only when the sign hypotheses fail).
inline MeanSystemSolution solve_mean_fixed_point(const LQModel& model,
                                                 bool allow_short_horizon = false) {
    if (!detail::mfg_sign_hypotheses_hold(model) && !allow_short_horizon)
        throw std::invalid_argument(
            "solve_mean_fixed_point: sign hypotheses q(q+qbar) >= 0 and "
            "inf m(m+mbar) >= 0 violated; pass allow_short_horizon to attempt anyway");

    const TimeGrid& g = model.grid;
    const int nn = g.n_nodes(), n = g.n_steps();
    const double dt = g.dt();

    // Integrating factor e_t = exp(-int_0^t abar); trapezoid is exact for the
    // piecewise-linear abar, including on half-steps.
    std::vector<double> e(nn), e_mid(n);
    double acc = 0.0;
    for (int k = 0; k < nn; ++k) {
        if (k > 0) acc += 0.5 * dt * (model.abar[k - 1] + model.abar[k]);
        e[k] = std::exp(-acc);
        if (k < n) {
            const double half = acc + 0.5 * (0.5 * dt) * (model.abar[k] + model.abar.mid(k));
            e_mid[k] = std::exp(-half);
        }
    }

    ReducedCoefficients rc;
    {
        std::vector<double> fx(nn), fy(nn), gx(nn), fxm(n), fym(n), gxm(n);
        for (int k = 0; k < nn; ++k) {
            fx[k] = model.a[k] + model.abar[k];
            fy[k] = -model.b[k] * model.b[k] / (e[k] * model.n[k]);
            gx[k] = -e[k] * model.m[k] * (model.m[k] + model.mbar[k]);
        }
        for (int k = 0; k < n; ++k) {
            fxm[k] = model.a.mid(k) + model.abar.mid(k);
            fym[k] = -model.b.mid(k) * model.b.mid(k) / (e_mid[k] * model.n.mid(k));
            gxm[k] = -e_mid[k] * model.m.mid(k) * (model.m.mid(k) + model.mbar.mid(k));
        }
        rc.fx = Sampled(g, std::move(fx));
        rc.fx.set_midpoints(std::move(fxm));
        rc.fy = Sampled(g, std::move(fy));
        rc.fy.set_midpoints(std::move(fym));
        rc.fc = model.beta;
        rc.gx = Sampled(g, std::move(gx));
        rc.gx.set_midpoints(std::move(gxm));
        rc.gc = Sampled(g, 0.0);
        rc.terminal_slope = e[n] * model.q * (model.q + model.qbar);
        rc.terminal_offset = 0.0;
    }

    MeanSystemSolution out;
    RiccatiSolution ric = decouple_linear_fbsde(rc, g, 0.0);
    if (!ric.ok()) {
        out.blow_up = ric.blow_up;
        return out;
    }
    const MomentPaths mp = forward_moments(rc, ric, 0.0, model.x0, g);
    out.mean = MeanFlow(g, mp.mean);
    out.adjoint.resize(nn);
    for (int k = 0; k < nn; ++k)
        out.adjoint[k] = (ric.eta[k] * mp.mean[k] + ric.chi[k]) / e[k];
    out.eta_bar = std::move(ric.eta);
    out.chi_bar = std::move(ric.chi);
    return out;
}

// Full pipeline: fixed-point mean flow, reduction, Riccati decoupling,
// equilibrium feedback, forward moments.
inline MFGSolution solve_mfg(const LQModel& model, bool allow_short_horizon = false) {
    MFGSolution sol;
    MeanSystemSolution ms = solve_mean_fixed_point(model, allow_short_horizon);
    if (!ms.ok()) {
        sol.blow_up = ms.blow_up;
        return sol;
    }
    const ReducedCoefficients rc = reduce_mfg(model, ms.mean);
    RiccatiSolution ric = decouple_linear_fbsde(rc, model.grid, model.sigma);
    if (!ric.ok()) {
        sol.blow_up = ric.blow_up;
        return sol;
    }
    sol.mean_flow = std::move(ms.mean);
    sol.eta_bar = std::move(ms.eta_bar);
    sol.chi_bar = std::move(ms.chi_bar);
    sol.feedback = detail::feedback_from_ansatz(model, ric.eta, ric.chi);
    sol.moments = forward_moments(rc, ric, model.sigma, model.x0, model.grid);
    sol.chi_cross_gap = ric.chi_cross_gap;
    sol.eta = std::move(ric.eta);
    sol.chi = std::move(ric.chi);
    double resid = 0.0;
    for (int k = 0; k < model.grid.n_nodes(); ++k)
        resid = std::max(resid, std::abs(sol.moments.mean[k] - sol.mean_flow[k]));
    sol.fixed_point_residual = resid;
    return sol;
}

// Expected equilibrium cost of a single player against the fixed-point mean flow.
inline double mfg_cost(const LQModel& model, const MFGSolution& sol) {
    if (!sol.ok()) throw std::invalid_argument("mfg_cost: no solution (blow-up)");
    return lq_policy_cost(model, sol.feedback, &sol.mean_flow).total;
}

}  // namespace meanfield
