#pragma once

// Optimal control of linear-quadratic McKean-Vlasov dynamics: the mean system
// obtained by taking expectations is already symmetric (no change of variable
// needed) and carries the right sign conditions, so it is always decoupleable;
// the reduced individual FBSDE then yields the optimal feedback.

#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

#include "meanfield/cost.hpp"
#include "meanfield/lq_model.hpp"
#include "meanfield/mfg_lq.hpp"
#include "meanfield/policy.hpp"
#include "meanfield/riccati.hpp"

namespace meanfield {

struct MKVSolution {
    MeanFlow xbar;                         // mean of the optimally controlled state
    std::vector<double> ybar;              // mean of the adjoint process
    std::vector<double> eta, chi;          // individual FBSDE decoupling
    std::vector<double> eta_bar, chi_bar;  // mean-system decoupling
    FeedbackPolicy feedback;
    MomentPaths moments;
    double consistency_residual = std::numeric_limits<double>::quiet_NaN();
    double chi_cross_gap = 0.0;
    std::optional<double> blow_up;

    bool ok() const { return !blow_up.has_value(); }
};

// Mean system
//   xbar' = (a+abar) xbar - (b^2/n) ybar + beta,
//   ybar' = -((a+abar) ybar + (m+mbar)^2 xbar),  ybar_T = (q+qbar)^2 xbar_T,
// decoupled by ybar = eta_bar*xbar + chi_bar. Blow-up is reported defensively
// but cannot occur for valid models (all aggregated signs are right).
inline MeanSystemSolution solve_mean_system(const LQModel& model) {
    const TimeGrid& g = model.grid;
    const int nn = g.n_nodes(), n = g.n_steps();

    ReducedCoefficients rc;
    {
        std::vector<double> fx(nn), fy(nn), gx(nn), fxm(n), fym(n), gxm(n);
        for (int k = 0; k < nn; ++k) {
            fx[k] = model.a[k] + model.abar[k];
            fy[k] = -model.b[k] * model.b[k] / model.n[k];
            const double mm = model.m[k] + model.mbar[k];
            gx[k] = -mm * mm;
        }
        for (int k = 0; k < n; ++k) {
            fxm[k] = model.a.mid(k) + model.abar.mid(k);
            fym[k] = -model.b.mid(k) * model.b.mid(k) / model.n.mid(k);
            const double mm = model.m.mid(k) + model.mbar.mid(k);
            gxm[k] = -mm * mm;
        }
        rc.fx = Sampled(g, std::move(fx));
        rc.fx.set_midpoints(std::move(fxm));
        rc.fy = Sampled(g, std::move(fy));
        rc.fy.set_midpoints(std::move(fym));
        rc.fc = model.beta;
        rc.gx = Sampled(g, std::move(gx));
        rc.gx.set_midpoints(std::move(gxm));
        rc.gc = Sampled(g, 0.0);
        const double qq = model.q + model.qbar;
        rc.terminal_slope = qq * qq;
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
    for (int k = 0; k < nn; ++k) out.adjoint[k] = ric.eta[k] * mp.mean[k] + ric.chi[k];
    out.eta_bar = std::move(ric.eta);
    out.chi_bar = std::move(ric.chi);
    return out;
}

// Full pipeline: mean system, MKV reduction, Riccati decoupling with terminal
// pair (q^2, qbar(2q+qbar) xbar_T), optimal feedback, forward moments.
inline MKVSolution solve_mkv(const LQModel& model) {
    MKVSolution sol;
    MeanSystemSolution ms = solve_mean_system(model);
    if (!ms.ok()) {
        sol.blow_up = ms.blow_up;
        return sol;
    }
    const MeanFlow ybar_flow(model.grid, ms.adjoint);
    const ReducedCoefficients rc = reduce_mkv(model, ms.mean, ybar_flow);
    RiccatiSolution ric = decouple_linear_fbsde(rc, model.grid, model.sigma);
    if (!ric.ok()) {
        sol.blow_up = ric.blow_up;
        return sol;
    }
    sol.xbar = std::move(ms.mean);
    sol.ybar = std::move(ms.adjoint);
    sol.eta_bar = std::move(ms.eta_bar);
    sol.chi_bar = std::move(ms.chi_bar);
    sol.feedback = detail::feedback_from_ansatz(model, ric.eta, ric.chi);
    sol.moments = forward_moments(rc, ric, model.sigma, model.x0, model.grid);
    sol.chi_cross_gap = ric.chi_cross_gap;
    sol.eta = std::move(ric.eta);
    sol.chi = std::move(ric.chi);
    double resid = 0.0;
    for (int k = 0; k < model.grid.n_nodes(); ++k)
        resid = std::max(resid, std::abs(sol.moments.mean[k] - sol.xbar[k]));
    sol.consistency_residual = resid;
    return sol;
}

struct CompareReport {
    double mfg_mean_T = std::numeric_limits<double>::quiet_NaN();
    double mkv_mean_T = std::numeric_limits<double>::quiet_NaN();
    double sup_mean_gap = std::numeric_limits<double>::quiet_NaN();
    double mfg_cost_under_mkv_objective = std::numeric_limits<double>::quiet_NaN();
    double mkv_cost = std::numeric_limits<double>::quiet_NaN();
};

// Head-to-head comparison of the two large-population limits on one model.
inline CompareReport compare_limits(const LQModel& model, bool allow_short_horizon = false) {
    const MFGSolution mfg = solve_mfg(model, allow_short_horizon);
    if (!mfg.ok()) throw std::runtime_error("compare_limits: MFG fixed point does not exist");
    const MKVSolution mkv = solve_mkv(model);
    if (!mkv.ok()) throw std::runtime_error("compare_limits: MKV mean system blew up");
    CompareReport rep;
    rep.mfg_mean_T = mfg.mean_flow.back();
    rep.mkv_mean_T = mkv.xbar.back();
    double gap = 0.0;
    for (int k = 0; k < model.grid.n_nodes(); ++k)
        gap = std::max(gap, std::abs(mfg.mean_flow[k] - mkv.xbar[k]));
    rep.sup_mean_gap = gap;
    rep.mfg_cost_under_mkv_objective = mkv_cost(model, mfg.feedback);
    rep.mkv_cost = meanfield::mkv_cost(model, mkv.feedback);
    return rep;
}

}  // namespace meanfield
