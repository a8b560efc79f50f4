#pragma once

// Exact cost of an affine feedback under Gaussian moment propagation. With an
// affine policy the state stays Gaussian, so every quadratic expectation in
// the objective reduces to the mean/variance pair, and the running cost can be
// accumulated as a third ODE component alongside the moments (all RK4).

#include <cmath>
#include <vector>

#include "meanfield/lq_model.hpp"
#include "meanfield/policy.hpp"

namespace meanfield {

struct CostAccounting {
    double total = 0.0;
    std::vector<double> mean;
    std::vector<double> variance;
};

// frozen_flow != nullptr: play against the exogenous mean flow (game cost).
// frozen_flow == nullptr: the mean in drift and costs is the law of the
// controlled state itself (control-of-MKV cost).
inline CostAccounting lq_policy_cost(const LQModel& model, const FeedbackPolicy& policy,
                                     const MeanFlow* frozen_flow) {
    const TimeGrid& g = model.grid;
    if (policy.n_nodes() != g.n_nodes())
        throw std::invalid_argument("lq_policy_cost: policy not sampled on the model grid");
    if (frozen_flow) detail::require_same_grid(model, *frozen_flow, "lq_policy_cost");
    const int n = g.n_steps();
    const double dt = g.dt();
    const double s2 = model.sigma * model.sigma;

    // State (mean, var, acc). where: 0 node k, 1 midpoint k, 2 node k+1.
    auto rhs = [&](int k, int where, double mean, double var, double& dm, double& dv,
                   double& dacc) {
        double a, abar, b, beta, m, mbar, ncost, s, c, mu;
        if (where == 0) {
            a = model.a[k]; abar = model.abar[k]; b = model.b[k]; beta = model.beta[k];
            m = model.m[k]; mbar = model.mbar[k]; ncost = model.n[k];
            s = policy.slope[k]; c = policy.intercept[k];
            mu = frozen_flow ? (*frozen_flow)[k] : mean;
        } else if (where == 1) {
            a = model.a.mid(k); abar = model.abar.mid(k); b = model.b.mid(k);
            beta = model.beta.mid(k); m = model.m.mid(k); mbar = model.mbar.mid(k);
            ncost = model.n.mid(k); s = policy.slope.mid(k); c = policy.intercept.mid(k);
            mu = frozen_flow ? frozen_flow->mid(k) : mean;
        } else {
            a = model.a[k + 1]; abar = model.abar[k + 1]; b = model.b[k + 1];
            beta = model.beta[k + 1]; m = model.m[k + 1]; mbar = model.mbar[k + 1];
            ncost = model.n[k + 1]; s = policy.slope[k + 1]; c = policy.intercept[k + 1];
            mu = frozen_flow ? (*frozen_flow)[k + 1] : mean;
        }
        dm = (a + b * s) * mean + abar * mu + b * c + beta;
        dv = 2.0 * (a + b * s) * var + s2;
        const double ex2 = var + mean * mean;
        const double e_alpha2 = s * s * ex2 + 2.0 * s * c * mean + c * c;
        const double e_run2 = m * m * ex2 + 2.0 * m * mbar * mu * mean + mbar * mbar * mu * mu;
        dacc = 0.5 * ncost * e_alpha2 + 0.5 * e_run2;
    };

    CostAccounting out;
    out.mean.assign(n + 1, 0.0);
    out.variance.assign(n + 1, 0.0);
    out.mean[0] = model.x0;
    double acc = 0.0;
    for (int k = 0; k < n; ++k) {
        const double m0 = out.mean[k], v0 = out.variance[k];
        double km[4], kv[4], ka[4];
        rhs(k, 0, m0, v0, km[0], kv[0], ka[0]);
        rhs(k, 1, m0 + 0.5 * dt * km[0], v0 + 0.5 * dt * kv[0], km[1], kv[1], ka[1]);
        rhs(k, 1, m0 + 0.5 * dt * km[1], v0 + 0.5 * dt * kv[1], km[2], kv[2], ka[2]);
        rhs(k, 2, m0 + dt * km[2], v0 + dt * kv[2], km[3], kv[3], ka[3]);
        out.mean[k + 1] = m0 + dt / 6.0 * (km[0] + 2.0 * km[1] + 2.0 * km[2] + km[3]);
        out.variance[k + 1] = v0 + dt / 6.0 * (kv[0] + 2.0 * kv[1] + 2.0 * kv[2] + kv[3]);
        acc += dt / 6.0 * (ka[0] + 2.0 * ka[1] + 2.0 * ka[2] + ka[3]);
        if (out.variance[k + 1] < 0.0 && out.variance[k + 1] > -1e-14) out.variance[k + 1] = 0.0;
    }
    const double meanT = out.mean[n];
    const double varT = out.variance[n];
    const double muT = frozen_flow ? frozen_flow->back() : meanT;
    const double q = model.q, qbar = model.qbar;
    acc += 0.5 * (q * q * (varT + meanT * meanT) + 2.0 * q * qbar * muT * meanT +
                  qbar * qbar * muT * muT);
    out.total = acc;
    return out;
}

// Cost of the full MKV objective under an arbitrary affine policy.
inline double mkv_cost(const LQModel& model, const FeedbackPolicy& policy) {
    return lq_policy_cost(model, policy, nullptr).total;
}

}  // namespace meanfield
