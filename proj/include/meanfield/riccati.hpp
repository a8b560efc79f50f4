#pragma once

// Backward integration of the scalar Riccati equation
//     eta' = -fy*eta^2 - 2*fx*eta + gx,   eta_T = terminal_slope,
// the associated linear offset equation
//     chi' + (fx + fy*eta) chi = gc - fc*eta,   chi_T = terminal_offset,
// and forward propagation of the Gaussian state moments. These decouple any
// linear FBSDE written in ReducedCoefficients form via y_t = eta_t x_t + chi_t.

#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "meanfield/lq_model.hpp"
#include "meanfield/time_grid.hpp"

namespace meanfield {

inline constexpr double kRiccatiBlowUpThreshold = 1e10;

struct RiccatiSolution {
    std::vector<double> eta;
    std::vector<double> chi;
    std::vector<double> z_scale;          // z_t = sigma * eta_t
    std::optional<double> blow_up;        // earliest time at which |eta| crosses the threshold
    double chi_cross_gap = 0.0;           // sup gap between the two chi routes, relative

    bool ok() const { return !blow_up.has_value(); }
};

struct MomentPaths {
    std::vector<double> mean;
    std::vector<double> variance;
};

namespace detail {

inline double riccati_rhs(const ReducedCoefficients& rc, double t, double eta) {
    return -rc.fy.at(t) * eta * eta - 2.0 * rc.fx.at(t) * eta + rc.gx.at(t);
}

inline bool eta_bad(double v) {
    return !std::isfinite(v) || std::abs(v) > kRiccatiBlowUpThreshold;
}

// One classical RK4 step of eta' = rhs from time t by signed step h.
inline double rk4_eta_step(const ReducedCoefficients& rc, double t, double eta, double h) {
    const double k1 = riccati_rhs(rc, t, eta);
    const double k2 = riccati_rhs(rc, t + 0.5 * h, eta + 0.5 * h * k1);
    const double k3 = riccati_rhs(rc, t + 0.5 * h, eta + 0.5 * h * k2);
    const double k4 = riccati_rhs(rc, t + h, eta + h * k3);
    return eta + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

// Eta at step midpoints via cubic Hermite interpolation (the ODE supplies
// the derivatives, so the interpolant is 4th-order accurate).
inline std::vector<double> eta_midpoints(const ReducedCoefficients& rc,
                                         const std::vector<double>& eta, const TimeGrid& g) {
    const int n = g.n_steps();
    std::vector<double> mid(n);
    for (int k = 0; k < n; ++k) {
        const double f0 = riccati_rhs(rc, g.t(k), eta[k]);
        const double f1 = riccati_rhs(rc, g.t(k + 1), eta[k + 1]);
        mid[k] = 0.5 * (eta[k] + eta[k + 1]) + g.dt() / 8.0 * (f0 - f1);
    }
    return mid;
}

}  // namespace detail

// Backward RK4 from eta_T = terminal_slope. On blow-up the integration halts,
// the crossing time is bisected down to dt/16, and nodes before it stay NaN.
inline RiccatiSolution solve_riccati(const ReducedCoefficients& rc, const TimeGrid& grid,
                                     double sigma = 0.0) {
    const int n = grid.n_steps();
    const double nan = std::numeric_limits<double>::quiet_NaN();
    RiccatiSolution sol;
    sol.eta.assign(grid.n_nodes(), nan);
    sol.z_scale.assign(grid.n_nodes(), nan);
    sol.eta[n] = rc.terminal_slope;
    for (int k = n - 1; k >= 0; --k) {
        const double t_hi = grid.t(k + 1);
        const double next = detail::rk4_eta_step(rc, t_hi, sol.eta[k + 1], -grid.dt());
        if (detail::eta_bad(next)) {
            // Locate the crossing inside (t(k), t(k+1)) to a window of dt/16.
            double lo = grid.t(k), hi = t_hi;
            while (hi - lo > grid.dt() / 16.0) {
                const double mid = 0.5 * (lo + hi);
                const double v = detail::rk4_eta_step(rc, t_hi, sol.eta[k + 1], mid - t_hi);
                if (detail::eta_bad(v))
                    lo = mid;
                else
                    hi = mid;
            }
            sol.blow_up = 0.5 * (lo + hi);
            break;
        }
        sol.eta[k] = next;
    }
    if (!sol.blow_up) {
        // A pole sitting within one step of t = 0 leaves values that are only
        // O(1/dt), far below the magnitude threshold; the signature is a huge
        // value whose relative slope still grows. Flag it as a boundary
        // blow-up (no solution on the full horizon at this resolution).
        const double scale = std::abs(sol.eta[0]);
        const double f0 = std::abs(detail::riccati_rhs(rc, grid.t(0), sol.eta[0]));
        if (scale * grid.dt() > 1.0 && f0 * grid.dt() > scale) sol.blow_up = 0.0;
    }
    for (int k = 0; k <= n; ++k) sol.z_scale[k] = sigma * sol.eta[k];
    return sol;
}

// chi by the closed quadrature formula
//   chi_t = r * exp(int_t^T A) - int_t^T (gc - fc*eta) exp(int_t^s A) ds,  A = fx + fy*eta,
// with Simpson accumulation of all integrals (midpoint eta from the Hermite
// interpolant, so the route is 4th order like the ODE route it cross-checks).
inline std::vector<double> chi_by_quadrature(const ReducedCoefficients& rc,
                                             const std::vector<double>& eta,
                                             const TimeGrid& grid) {
    const int n = grid.n_steps();
    const double dt = grid.dt();
    const std::vector<double> emid = detail::eta_midpoints(rc, eta, grid);

    auto A_at_node = [&](int k) { return rc.fx[k] + rc.fy[k] * eta[k]; };
    auto A_at_mid = [&](int k) { return rc.fx.mid(k) + rc.fy.mid(k) * emid[k]; };
    auto h_at_node = [&](int k) { return rc.gc[k] - rc.fc[k] * eta[k]; };
    auto h_at_mid = [&](int k) { return rc.gc.mid(k) - rc.fc.mid(k) * emid[k]; };

    std::vector<double> I(n + 1, 0.0), Imid(n);
    for (int k = 0; k < n; ++k) {
        const double a0 = A_at_node(k), am = A_at_mid(k), a1 = A_at_node(k + 1);
        Imid[k] = I[k] + dt / 24.0 * (5.0 * a0 + 8.0 * am - a1);
        I[k + 1] = I[k] + dt / 6.0 * (a0 + 4.0 * am + a1);
    }
    double shift = I[0];
    for (int k = 0; k <= n; ++k) shift = std::max(shift, I[k]);

    std::vector<double> S(n + 1, 0.0);  // int_{t_k}^T h e^{I - shift}
    for (int k = n - 1; k >= 0; --k) {
        const double piece =
            dt / 6.0 *
            (h_at_node(k) * std::exp(I[k] - shift) + 4.0 * h_at_mid(k) * std::exp(Imid[k] - shift) +
             h_at_node(k + 1) * std::exp(I[k + 1] - shift));
        S[k] = S[k + 1] + piece;
    }
    std::vector<double> chi(n + 1);
    for (int k = 0; k <= n; ++k)
        chi[k] = std::exp(shift - I[k]) * (rc.terminal_offset * std::exp(I[n] - shift) - S[k]);
    return chi;
}

// chi by backward RK4 on chi' = -(fx + fy*eta) chi + (gc - fc*eta).
inline std::vector<double> solve_chi(const ReducedCoefficients& rc, const std::vector<double>& eta,
                                     const TimeGrid& grid) {
    const int n = grid.n_steps();
    const double dt = grid.dt();
    const std::vector<double> emid = detail::eta_midpoints(rc, eta, grid);

    auto rhs = [&](int k, int where, double chi) {
        // where: 0 -> node k, 1 -> midpoint of step k, 2 -> node k+1
        double A, h;
        if (where == 0) {
            A = rc.fx[k] + rc.fy[k] * eta[k];
            h = rc.gc[k] - rc.fc[k] * eta[k];
        } else if (where == 1) {
            A = rc.fx.mid(k) + rc.fy.mid(k) * emid[k];
            h = rc.gc.mid(k) - rc.fc.mid(k) * emid[k];
        } else {
            A = rc.fx[k + 1] + rc.fy[k + 1] * eta[k + 1];
            h = rc.gc[k + 1] - rc.fc[k + 1] * eta[k + 1];
        }
        return -A * chi + h;
    };

    std::vector<double> chi(n + 1);
    chi[n] = rc.terminal_offset;
    for (int k = n - 1; k >= 0; --k) {
        const double hstep = -dt;
        const double c1 = rhs(k, 2, chi[k + 1]);
        const double c2 = rhs(k, 1, chi[k + 1] + 0.5 * hstep * c1);
        const double c3 = rhs(k, 1, chi[k + 1] + 0.5 * hstep * c2);
        const double c4 = rhs(k, 0, chi[k + 1] + hstep * c3);
        chi[k] = chi[k + 1] + hstep / 6.0 * (c1 + 2.0 * c2 + 2.0 * c3 + c4);
    }
    return chi;
}

// Full decoupling: eta, chi (both routes, gap recorded), z scale.
inline RiccatiSolution decouple_linear_fbsde(const ReducedCoefficients& rc, const TimeGrid& grid,
                                             double sigma) {
    RiccatiSolution sol = solve_riccati(rc, grid, sigma);
    if (!sol.ok()) return sol;
    sol.chi = solve_chi(rc, sol.eta, grid);
    const std::vector<double> alt = chi_by_quadrature(rc, sol.eta, grid);
    double sup_diff = 0.0, sup_mag = 0.0;
    for (int k = 0; k < grid.n_nodes(); ++k) {
        sup_diff = std::max(sup_diff, std::abs(sol.chi[k] - alt[k]));
        sup_mag = std::max(sup_mag, std::abs(sol.chi[k]));
    }
    sol.chi_cross_gap = sup_diff / std::max(sup_mag, 1e-300);
    return sol;
}

// Mean and variance of the decoupled forward state
//   dx = [(fx + fy*eta) x + fy*chi + fc] dt + sigma dW,  x_0 given:
//   mean' = A mean + (fy*chi + fc),  var' = 2 A var + sigma^2, A = fx + fy*eta.
// RK4 on the two moment ODEs; these are exactly the moments of the explicit
// Gaussian solution of the linear SDE.
inline MomentPaths forward_moments(const ReducedCoefficients& rc, const RiccatiSolution& ric,
                                   double sigma, double x0, const TimeGrid& grid) {
    if (!ric.ok()) throw std::invalid_argument("forward_moments: Riccati solution blew up");
    const int n = grid.n_steps();
    const double dt = grid.dt();
    const std::vector<double>& eta = ric.eta;
    const std::vector<double>& chi = ric.chi;
    const std::vector<double> emid = detail::eta_midpoints(rc, eta, grid);

    // chi at midpoints via Hermite with chi' = -A chi + h.
    std::vector<double> cmid(n);
    for (int k = 0; k < n; ++k) {
        const double d0 = -(rc.fx[k] + rc.fy[k] * eta[k]) * chi[k] + (rc.gc[k] - rc.fc[k] * eta[k]);
        const double d1 = -(rc.fx[k + 1] + rc.fy[k + 1] * eta[k + 1]) * chi[k + 1] +
                          (rc.gc[k + 1] - rc.fc[k + 1] * eta[k + 1]);
        cmid[k] = 0.5 * (chi[k] + chi[k + 1]) + dt / 8.0 * (d0 - d1);
    }

    auto coeffs = [&](int k, int where, double& A, double& c) {
        if (where == 0) {
            A = rc.fx[k] + rc.fy[k] * eta[k];
            c = rc.fy[k] * chi[k] + rc.fc[k];
        } else if (where == 1) {
            A = rc.fx.mid(k) + rc.fy.mid(k) * emid[k];
            c = rc.fy.mid(k) * cmid[k] + rc.fc.mid(k);
        } else {
            A = rc.fx[k + 1] + rc.fy[k + 1] * eta[k + 1];
            c = rc.fy[k + 1] * chi[k + 1] + rc.fc[k + 1];
        }
    };

    MomentPaths out;
    out.mean.assign(n + 1, 0.0);
    out.variance.assign(n + 1, 0.0);
    out.mean[0] = x0;
    const double s2 = sigma * sigma;
    for (int k = 0; k < n; ++k) {
        double A0, c0, Am, cm, A1, c1;
        coeffs(k, 0, A0, c0);
        coeffs(k, 1, Am, cm);
        coeffs(k, 2, A1, c1);
        auto step2 = [&](double m0, double v0, double& m1, double& v1) {
            const double km1 = A0 * m0 + c0;
            const double kv1 = 2.0 * A0 * v0 + s2;
            const double km2 = Am * (m0 + 0.5 * dt * km1) + cm;
            const double kv2 = 2.0 * Am * (v0 + 0.5 * dt * kv1) + s2;
            const double km3 = Am * (m0 + 0.5 * dt * km2) + cm;
            const double kv3 = 2.0 * Am * (v0 + 0.5 * dt * kv2) + s2;
            const double km4 = A1 * (m0 + dt * km3) + c1;
            const double kv4 = 2.0 * A1 * (v0 + dt * kv3) + s2;
            m1 = m0 + dt / 6.0 * (km1 + 2.0 * km2 + 2.0 * km3 + km4);
            v1 = v0 + dt / 6.0 * (kv1 + 2.0 * kv2 + 2.0 * kv3 + kv4);
        };
        step2(out.mean[k], out.variance[k], out.mean[k + 1], out.variance[k + 1]);
        if (out.variance[k + 1] < 0.0 && out.variance[k + 1] > -1e-14)
            out.variance[k + 1] = 0.0;  // shave roundoff at sigma ~ 0
    }
    return out;
}

}  // namespace meanfield
