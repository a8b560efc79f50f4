#pragma once

// Linear-quadratic game data: time-sampled coefficients, model validation,
// and the reduction to the streamlined linear FBSDE coefficient table.

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "meanfield/time_grid.hpp"

namespace meanfield {

// Scalar function of time sampled on a TimeGrid; piecewise linear between
// nodes. Constants are broadcast to the grid at construction.
class Sampled {
public:
    Sampled() = default;

    Sampled(const TimeGrid& grid, double constant)
        : values_(static_cast<std::size_t>(grid.n_nodes()), constant),
          dt_(grid.dt()),
          horizon_(grid.horizon()) {}

    Sampled(const TimeGrid& grid, std::vector<double> values)
        : values_(std::move(values)), dt_(grid.dt()), horizon_(grid.horizon()) {
        if (static_cast<int>(values_.size()) != grid.n_nodes())
            throw std::invalid_argument("Sampled: need one value per grid node");
        for (double v : values_)
            if (!std::isfinite(v)) throw std::invalid_argument("Sampled: non-finite value");
    }

    int n_nodes() const { return static_cast<int>(values_.size()); }
    double operator[](int k) const { return values_[static_cast<std::size_t>(k)]; }
    double& operator[](int k) { return values_[static_cast<std::size_t>(k)]; }
    const std::vector<double>& values() const { return values_; }
    double back() const { return values_.back(); }

    double at(double t) const {
        if (t <= 0.0) return values_.front();
        if (t >= horizon_) return values_.back();
        const int k = std::min(static_cast<int>(t / dt_), n_nodes() - 2);
        const double w = (t - k * dt_) / dt_;
        return (1.0 - w) * values_[k] + w * values_[k + 1];
    }

    double mid(int k) const {
        if (!mid_values_.empty()) return mid_values_[static_cast<std::size_t>(k)];
        return 0.5 * (values_[k] + values_[k + 1]);
    }

    // Pin exact step-midpoint values (for coefficients that are known in
    // closed form between nodes, e.g. exponential integrating factors).
    void set_midpoints(std::vector<double> mids) {
        if (static_cast<int>(mids.size()) != n_nodes() - 1)
            throw std::invalid_argument("Sampled: need one midpoint per step");
        mid_values_ = std::move(mids);
    }

    double min_value() const {
        double m = values_.front();
        for (double v : values_) m = std::min(m, v);
        return m;
    }

private:
    std::vector<double> values_;
    std::vector<double> mid_values_;
    double dt_ = 0.0;
    double horizon_ = 0.0;
};

// Deterministic time-sampled flow t -> mean of the state law.
using MeanFlow = Sampled;

struct LQModel {
    TimeGrid grid;
    Sampled a, abar, b, beta, m, mbar, n;
    double q = 0.0;
    double qbar = 0.0;
    double sigma = 0.0;
    double x0 = 0.0;

    LQModel(TimeGrid g, Sampled a_, Sampled abar_, Sampled b_, Sampled beta_, Sampled m_,
            Sampled mbar_, Sampled n_, double q_, double qbar_, double sigma_, double x0_)
        : grid(g),
          a(std::move(a_)),
          abar(std::move(abar_)),
          b(std::move(b_)),
          beta(std::move(beta_)),
          m(std::move(m_)),
          mbar(std::move(mbar_)),
          n(std::move(n_)),
          q(q_),
          qbar(qbar_),
          sigma(sigma_),
          x0(x0_) {
        validate();
    }

    // Constant-coefficient convenience constructor.
    LQModel(TimeGrid g, double a_, double abar_, double b_, double beta_, double m_,
            double mbar_, double n_, double q_, double qbar_, double sigma_, double x0_)
        : LQModel(g, Sampled(g, a_), Sampled(g, abar_), Sampled(g, b_), Sampled(g, beta_),
                  Sampled(g, m_), Sampled(g, mbar_), Sampled(g, n_), q_, qbar_, sigma_, x0_) {}

    void validate() const {
        if (b.min_value() <= 0.0)
            throw std::invalid_argument("LQModel: control gain b must be positive on [0,T]");
        if (n.min_value() <= 0.0)
            throw std::invalid_argument("LQModel: control cost n must be positive on [0,T]");
        if (!(sigma >= 0.0) || !std::isfinite(sigma))
            throw std::invalid_argument("LQModel: sigma must be nonnegative");
        if (!std::isfinite(x0) || !std::isfinite(q) || !std::isfinite(qbar))
            throw std::invalid_argument("LQModel: non-finite scalar parameter");
    }

    // Minimum over grid nodes of m_t (m_t + mbar_t).
    double min_running_aggregate() const {
        double mn = m[0] * (m[0] + mbar[0]);
        for (int k = 1; k < grid.n_nodes(); ++k) mn = std::min(mn, m[k] * (m[k] + mbar[k]));
        return mn;
    }
};

// Coefficient table of the reduced linear FBSDE
//   dx = [fx*x + fy*y + fc] dt + sigma dW
//   dy = [gx*x - fx*y + gc] dt + z dW,   y_T = terminal_slope*x_T + terminal_offset.
struct ReducedCoefficients {
    Sampled fx;  // coefficient of x in the forward drift
    Sampled fy;  // coefficient of y in the forward drift (negative for valid models)
    Sampled fc;  // affine forward term
    Sampled gx;  // coefficient of x in the backward drift
    Sampled gc;  // affine backward term
    double terminal_slope = 0.0;
    double terminal_offset = 0.0;
};

namespace detail {
inline void require_same_grid(const LQModel& model, const MeanFlow& flow, const char* what) {
    if (flow.n_nodes() != model.grid.n_nodes())
        throw std::invalid_argument(std::string(what) + ": flow not sampled on the model grid");
}
}  // namespace detail

// Substitutions for the game against a frozen mean flow.
inline ReducedCoefficients reduce_mfg(const LQModel& model, const MeanFlow& mean_flow) {
    detail::require_same_grid(model, mean_flow, "reduce_mfg");
    const TimeGrid& g = model.grid;
    const int nn = g.n_nodes();
    std::vector<double> fy(nn), fc(nn), gx(nn), gc(nn);
    for (int k = 0; k < nn; ++k) {
        fy[k] = -model.b[k] * model.b[k] / model.n[k];
        fc[k] = model.beta[k] + model.abar[k] * mean_flow[k];
        gx[k] = -model.m[k] * model.m[k];
        gc[k] = -model.m[k] * model.mbar[k] * mean_flow[k];
    }
    ReducedCoefficients rc;
    rc.fx = model.a;
    rc.fy = Sampled(g, std::move(fy));
    rc.fc = Sampled(g, std::move(fc));
    rc.gx = Sampled(g, std::move(gx));
    rc.gc = Sampled(g, std::move(gc));
    rc.terminal_slope = model.q * model.q;
    rc.terminal_offset = model.q * model.qbar * mean_flow.back();
    return rc;
}

// Substitutions for the control-of-MKV problem once the mean system
// (xbar, ybar) is known; differs from reduce_mfg exactly in gc and the
// terminal offset.
inline ReducedCoefficients reduce_mkv(const LQModel& model, const MeanFlow& xbar,
                                      const MeanFlow& ybar) {
    detail::require_same_grid(model, xbar, "reduce_mkv");
    detail::require_same_grid(model, ybar, "reduce_mkv");
    ReducedCoefficients rc = reduce_mfg(model, xbar);
    const TimeGrid& g = model.grid;
    const int nn = g.n_nodes();
    std::vector<double> gc(nn);
    for (int k = 0; k < nn; ++k) {
        gc[k] = -model.mbar[k] * (2.0 * model.m[k] + model.mbar[k]) * xbar[k] -
                model.abar[k] * ybar[k];
    }
    rc.gc = Sampled(g, std::move(gc));
    rc.terminal_offset = model.qbar * (2.0 * model.q + model.qbar) * xbar.back();
    return rc;
}

}  // namespace meanfield
