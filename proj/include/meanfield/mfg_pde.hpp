#pragma once

// Finite-difference realization of the MFG fixed-point map for scalar
// interactions: freeze the mean flow, sweep the HJB equation backward, read
// the feedback drift off the value gradient, push the density forward through
// the Kolmogorov equation, extract the new mean flow, damp, repeat.
//
// Discretization notes:
//  * cell-centered grid, zero-flux boundaries for both equations, so mass is
//    conserved to roundoff by construction;
//  * diffusion: Crank-Nicolson with two backward-Euler startup steps (kinked
//    terminal data / near-Dirac initial data);
//  * HJB Hamiltonian: explicit at the half step with one corrector pass;
//  * advection: finite-volume upwind flux with van Leer limited second-order
//    reconstruction, drift time-centered;
//  * CFL on the drift is enforced, violations refuse with the required dt.

#include <cmath>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "meanfield/lq_model.hpp"
#include "meanfield/time_grid.hpp"

namespace meanfield {

struct SpaceGrid {
    double x_min, x_max;
    int n_x;  // cell count; values live at cell centers
    double dx;

    SpaceGrid(double lo, double hi, int cells)
        : x_min(lo), x_max(hi), n_x(cells), dx((hi - lo) / cells) {
        if (!(hi > lo)) throw std::invalid_argument("SpaceGrid: empty domain");
        if (cells < 50) throw std::invalid_argument("SpaceGrid: need at least 50 cells");
    }

    double center(int i) const { return x_min + (i + 0.5) * dx; }
};

// Domain wide enough to hold n_std driftless standard deviations at the final
// time around x0, plus an allowance for the controlled drift.
inline SpaceGrid default_domain(double x0, double sigma, double horizon, double drift_bound,
                                int n_x, double n_std = 6.0) {
    const double half = n_std * sigma * std::sqrt(horizon) + std::abs(drift_bound) * horizon;
    return SpaceGrid(x0 - half, x0 + half, n_x);
}

struct DensityPath {
    std::vector<std::vector<double>> values;  // (n_steps+1) x n_x

    double mass(const SpaceGrid& g, int k) const {
        double s = 0.0;
        for (double v : values[k]) s += v;
        return s * g.dx;
    }
    double mean(const SpaceGrid& g, int k) const {
        double s = 0.0, m = 0.0;
        for (int i = 0; i < g.n_x; ++i) {
            s += values[k][i];
            m += values[k][i] * g.center(i);
        }
        return m / s;
    }
};

struct ValueSurface {
    std::vector<std::vector<double>> values;  // (n_steps+1) x n_x
};

class CflError : public std::runtime_error {
public:
    CflError(double dt_used, double dt_required)
        : std::runtime_error("CFL violation: dt = " + std::to_string(dt_used) +
                             " exceeds required dt = " + std::to_string(dt_required)),
          required_dt(dt_required) {}
    double required_dt;
};

// Control problem with scalar interaction (coefficients see the measure flow
// through its mean only), drift = drift0 + control_coeff * alpha and running
// cost = control_cost * alpha^2 / 2 + running.
struct ScalarMeanProblem {
    std::function<double(double t, double x, double mu)> drift0;
    std::function<double(double t)> control_coeff;
    std::function<double(double t)> control_cost;
    std::function<double(double t, double x, double mu)> running;
    std::function<double(double x, double mu_T)> terminal;
    double sigma = 0.0;
    double x0 = 0.0;
};

namespace pde_detail {

inline constexpr double kCflLimit = 0.9;

// Solve (I - c*Lap) out = rhs with the zero-flux Laplacian stencil, c >= 0.
// Thomas algorithm; the matrix columns sum to one, so sums are preserved.
inline void solve_diffusion_system(const std::vector<double>& rhs, double c,
                                   std::vector<double>& out, std::vector<double>& scratch_b,
                                   std::vector<double>& scratch_d) {
    const int n = static_cast<int>(rhs.size());
    std::vector<double>& diag = scratch_b;
    std::vector<double>& work = scratch_d;
    diag.resize(n);
    work.resize(n);
    out.resize(n);
    // Row i: -c*v[i-1] + (1 + 2c)*v[i] - c*v[i+1], Neumann-folded at the ends.
    for (int i = 0; i < n; ++i) diag[i] = (i == 0 || i == n - 1) ? 1.0 + c : 1.0 + 2.0 * c;
    // Forward elimination.
    work[0] = rhs[0];
    for (int i = 1; i < n; ++i) {
        const double w = -c / diag[i - 1];
        diag[i] -= w * (-c);
        work[i] = rhs[i] - w * work[i - 1];
    }
    out[n - 1] = work[n - 1] / diag[n - 1];
    for (int i = n - 2; i >= 0; --i) out[i] = (work[i] + c * out[i + 1]) / diag[i];
}

// Zero-flux Laplacian applied explicitly (for the Crank-Nicolson half).
inline void apply_laplacian(const std::vector<double>& v, std::vector<double>& out) {
    const int n = static_cast<int>(v.size());
    out.resize(n);
    for (int i = 0; i < n; ++i) {
        const double left = (i == 0) ? v[0] : v[i - 1];
        const double right = (i == n - 1) ? v[n - 1] : v[i + 1];
        out[i] = left - 2.0 * v[i] + right;
    }
}

inline void central_gradient(const std::vector<double>& v, double dx, std::vector<double>& p) {
    const int n = static_cast<int>(v.size());
    p.resize(n);
    for (int i = 1; i + 1 < n; ++i) p[i] = (v[i + 1] - v[i - 1]) / (2.0 * dx);
    p[0] = (v[1] - v[0]) / dx;
    p[n - 1] = (v[n - 1] - v[n - 2]) / dx;
}

inline double van_leer(double r) { return (r + std::abs(r)) / (1.0 + std::abs(r)); }

}  // namespace pde_detail

// Backward HJB sweep for a frozen mean flow.
inline ValueSurface solve_hjb(const MeanFlow& mean_flow, const ScalarMeanProblem& prob,
                              const TimeGrid& tg, const SpaceGrid& sg) {
    if (mean_flow.n_nodes() != tg.n_nodes())
        throw std::invalid_argument("solve_hjb: mean flow not sampled on the time grid");
    if (!(prob.sigma > 0.0)) throw std::invalid_argument("solve_hjb: sigma must be positive");
    const int nt = tg.n_steps(), nx = sg.n_x;
    const double dt = tg.dt(), dx = sg.dx;

    ValueSurface vs;
    vs.values.assign(nt + 1, std::vector<double>(nx, 0.0));
    for (int i = 0; i < nx; ++i)
        vs.values[nt][i] = prob.terminal(sg.center(i), mean_flow.back());

    std::vector<double> p(nx), rhs(nx), lap(nx), sb, sd, pnew(nx);
    const double diff = 0.5 * prob.sigma * prob.sigma / (dx * dx);

    for (int k = nt - 1; k >= 0; --k) {
        const std::vector<double>& vnext = vs.values[k + 1];
        const double tmid = tg.t_mid(k);
        const double mumid = 0.5 * (mean_flow[k] + mean_flow[k + 1]);
        const double bmid = prob.control_coeff(tmid);
        const double nmid = prob.control_cost(tmid);
        const double gain = bmid * bmid / nmid;
        const double theta = (k >= nt - 2) ? 1.0 : 0.5;  // backward-Euler startup

        pde_detail::central_gradient(vnext, dx, p);

        // CFL on the effective transport speed of the Hamiltonian.
        double max_speed = 0.0;
        for (int i = 0; i < nx; ++i) {
            const double speed = prob.drift0(tmid, sg.center(i), mumid) - gain * p[i];
            max_speed = std::max(max_speed, std::abs(speed));
        }
        if (dt * max_speed / dx > pde_detail::kCflLimit)
            throw CflError(dt, pde_detail::kCflLimit * dx / max_speed);

        auto sweep = [&](const std::vector<double>& grad, std::vector<double>& out) {
            pde_detail::apply_laplacian(vnext, lap);
            for (int i = 0; i < nx; ++i) {
                const double x = sg.center(i);
                const double ham = grad[i] * prob.drift0(tmid, x, mumid) -
                                   0.5 * gain * grad[i] * grad[i] + prob.running(tmid, x, mumid);
                rhs[i] = vnext[i] + (1.0 - theta) * dt * diff * lap[i] + dt * ham;
            }
            pde_detail::solve_diffusion_system(rhs, theta * dt * diff, out, sb, sd);
        };

        // Predictor with the lagged gradient, one corrector with the average.
        sweep(p, vs.values[k]);
        pde_detail::central_gradient(vs.values[k], dx, pnew);
        for (int i = 0; i < nx; ++i) pnew[i] = 0.5 * (pnew[i] + p[i]);
        sweep(pnew, vs.values[k]);
    }
    return vs;
}

// d/dx of a value surface, per time level (central differences).
inline std::vector<std::vector<double>> gradient_surface(const ValueSurface& vs,
                                                         const SpaceGrid& sg) {
    std::vector<std::vector<double>> grad(vs.values.size());
    for (std::size_t k = 0; k < vs.values.size(); ++k)
        pde_detail::central_gradient(vs.values[k], sg.dx, grad[k]);
    return grad;
}

// Realized drift field of the optimally controlled state,
// beta(t,x) = drift0 - (b^2/n) d/dx v.
inline std::vector<std::vector<double>> feedback_drift_field(const ValueSurface& vs,
                                                             const ScalarMeanProblem& prob,
                                                             const MeanFlow& mean_flow,
                                                             const TimeGrid& tg,
                                                             const SpaceGrid& sg) {
    std::vector<std::vector<double>> field = gradient_surface(vs, sg);
    for (int k = 0; k <= tg.n_steps(); ++k) {
        const double t = tg.t(k);
        const double b = prob.control_coeff(t);
        const double gain = b * b / prob.control_cost(t);
        for (int i = 0; i < sg.n_x; ++i)
            field[k][i] = prob.drift0(t, sg.center(i), mean_flow[k]) - gain * field[k][i];
    }
    return field;
}

// Near-Dirac initial density: Gaussian of width 2*dx, normalized on the grid.
inline std::vector<double> mollified_dirac(const SpaceGrid& sg, double x0) {
    std::vector<double> d(sg.n_x);
    const double w = 2.0 * sg.dx;
    double mass = 0.0;
    for (int i = 0; i < sg.n_x; ++i) {
        const double z = (sg.center(i) - x0) / w;
        d[i] = std::exp(-0.5 * z * z);
        mass += d[i] * sg.dx;
    }
    for (double& v : d) v /= mass;
    return d;
}

// Forward Kolmogorov sweep under a given drift field (one row per time node).
inline DensityPath solve_kolmogorov(const std::vector<std::vector<double>>& drift, double sigma,
                                    const TimeGrid& tg, const SpaceGrid& sg,
                                    const std::vector<double>& initial_density) {
    const int nt = tg.n_steps(), nx = sg.n_x;
    const double dt = tg.dt(), dx = sg.dx;
    if (static_cast<int>(drift.size()) != nt + 1)
        throw std::invalid_argument("solve_kolmogorov: drift field needs one row per time node");
    if (static_cast<int>(initial_density.size()) != nx)
        throw std::invalid_argument("solve_kolmogorov: initial density size mismatch");
    if (!(sigma > 0.0)) throw std::invalid_argument("solve_kolmogorov: sigma must be positive");

    DensityPath dp;
    dp.values.assign(nt + 1, std::vector<double>(nx, 0.0));
    dp.values[0] = initial_density;

    std::vector<double> cface(nx + 1), flux(nx + 1), rhs(nx), lap(nx), sb, sd;
    std::vector<double> adv1(nx), adv2(nx), star(nx);
    const double diff = 0.5 * sigma * sigma / (dx * dx);

    // Limited upwind flux divergence: out = -(1/dx) d/dx F[nu].
    auto advective_divergence = [&](const std::vector<double>& nu, std::vector<double>& out) {
        flux[0] = flux[nx] = 0.0;
        for (int i = 1; i < nx; ++i) {
            // Face i between cells i-1 and i.
            double left = nu[i - 1], right = nu[i];
            const double d_c = nu[i] - nu[i - 1];
            if (i >= 2 && d_c != 0.0)
                left += 0.5 * pde_detail::van_leer((nu[i - 1] - nu[i - 2]) / d_c) * d_c;
            if (i + 1 < nx && d_c != 0.0)
                right -= 0.5 * pde_detail::van_leer((nu[i + 1] - nu[i]) / d_c) * d_c;
            flux[i] = cface[i] >= 0.0 ? cface[i] * left : cface[i] * right;
        }
        for (int i = 0; i < nx; ++i) out[i] = -(flux[i + 1] - flux[i]) / dx;
    };

    for (int k = 0; k < nt; ++k) {
        const std::vector<double>& nu = dp.values[k];
        // Time-centered drift, averaged onto faces; zero-flux boundary faces.
        double max_speed = 0.0;
        cface[0] = cface[nx] = 0.0;
        for (int i = 1; i < nx; ++i) {
            const double cl = 0.5 * (drift[k][i - 1] + drift[k + 1][i - 1]);
            const double cr = 0.5 * (drift[k][i] + drift[k + 1][i]);
            cface[i] = 0.5 * (cl + cr);
            max_speed = std::max(max_speed, std::abs(cface[i]));
        }
        if (dt * max_speed / dx > pde_detail::kCflLimit)
            throw CflError(dt, pde_detail::kCflLimit * dx / max_speed);

        // Heun step for the advection (plain Euler leaves an O(dt) bias in the
        // transported mean), Crank-Nicolson for the diffusion.
        advective_divergence(nu, adv1);
        for (int i = 0; i < nx; ++i) star[i] = nu[i] + dt * adv1[i];
        advective_divergence(star, adv2);

        const double theta = (k < 2) ? 1.0 : 0.5;
        pde_detail::apply_laplacian(nu, lap);
        for (int i = 0; i < nx; ++i)
            rhs[i] = nu[i] + (1.0 - theta) * dt * diff * lap[i] +
                     0.5 * dt * (adv1[i] + adv2[i]);
        pde_detail::solve_diffusion_system(rhs, theta * dt * diff, dp.values[k + 1], sb, sd);

        // Shave roundoff-scale negatives, keeping the mass fixed.
        double lo = 0.0, mass_before = 0.0;
        for (double v : dp.values[k + 1]) {
            lo = std::min(lo, v);
            mass_before += v;
        }
        if (lo < 0.0 && lo > -1e-10) {
            double mass_after = 0.0;
            for (double& v : dp.values[k + 1]) {
                if (v < 0.0) v = 0.0;
                mass_after += v;
            }
            const double scale = mass_before / mass_after;
            for (double& v : dp.values[k + 1]) v *= scale;
        }
    }
    return dp;
}

struct PicardResult {
    MeanFlow mean_flow;
    ValueSurface value;
    DensityPath density;
    std::vector<double> residuals;  // undamped fixed-point residual per iteration
    bool converged = false;
    int iterations = 0;
};

// Damped Picard iteration of the fixed-point map. Non-convergence within
// max_iter is reported, not thrown; the residual trace tells the story.
inline PicardResult picard_solve(const ScalarMeanProblem& prob, const TimeGrid& tg,
                                 const SpaceGrid& sg, double damping = 0.5, double tol = 1e-6,
                                 int max_iter = 50) {
    if (!(damping > 0.0 && damping <= 1.0))
        throw std::invalid_argument("picard_solve: damping must lie in (0,1]");
    if (!(tol > 0.0)) throw std::invalid_argument("picard_solve: tol must be positive");

    const std::vector<double> init = mollified_dirac(sg, prob.x0);
    PicardResult res;
    MeanFlow mu(tg, prob.x0);

    for (int it = 1; it <= max_iter; ++it) {
        res.value = solve_hjb(mu, prob, tg, sg);
        const auto drift = feedback_drift_field(res.value, prob, mu, tg, sg);
        res.density = solve_kolmogorov(drift, prob.sigma, tg, sg, init);

        std::vector<double> mapped(tg.n_nodes());
        for (int k = 0; k < tg.n_nodes(); ++k) mapped[k] = res.density.mean(sg, k);

        double resid = 0.0;
        for (int k = 0; k < tg.n_nodes(); ++k)
            resid = std::max(resid, std::abs(mapped[k] - mu[k]));
        res.residuals.push_back(resid);
        res.iterations = it;

        if (resid < tol) {
            res.converged = true;
            res.mean_flow = MeanFlow(tg, std::move(mapped));
            return res;
        }
        std::vector<double> next(tg.n_nodes());
        for (int k = 0; k < tg.n_nodes(); ++k)
            next[k] = damping * mapped[k] + (1.0 - damping) * mu[k];
        mu = MeanFlow(tg, std::move(next));
    }
    res.mean_flow = mu;
    return res;
}

// Problem descriptors ---------------------------------------------------------

inline ScalarMeanProblem lq_problem(const LQModel& model) {
    ScalarMeanProblem p;
    p.drift0 = [model](double t, double x, double mu) {
        return model.a.at(t) * x + model.abar.at(t) * mu + model.beta.at(t);
    };
    p.control_coeff = [model](double t) { return model.b.at(t); };
    p.control_cost = [model](double t) { return model.n.at(t); };
    p.running = [model](double t, double x, double mu) {
        const double r = model.m.at(t) * x + model.mbar.at(t) * mu;
        return 0.5 * r * r;
    };
    p.terminal = [model](double x, double mu_T) {
        const double g = model.q * x + model.qbar * mu_T;
        return 0.5 * g * g;
    };
    p.sigma = model.sigma;
    p.x0 = model.x0;
    return p;
}

// f = alpha^2/2 + x*mu, g = 0.
inline ScalarMeanProblem additive_running_problem(double sigma, double x0) {
    ScalarMeanProblem p;
    p.drift0 = [](double, double, double) { return 0.0; };
    p.control_coeff = [](double) { return 1.0; };
    p.control_cost = [](double) { return 1.0; };
    p.running = [](double, double x, double mu) { return x * mu; };
    p.terminal = [](double, double) { return 0.0; };
    p.sigma = sigma;
    p.x0 = x0;
    return p;
}

// Emissions game: drift = -alpha, f = alpha^2/2, capped terminal penalty.
inline ScalarMeanProblem emissions_problem(double lambda, double cap, double sigma, double x0) {
    ScalarMeanProblem p;
    p.drift0 = [](double, double, double) { return 0.0; };
    p.control_coeff = [](double) { return -1.0; };
    p.control_cost = [](double) { return 1.0; };
    p.running = [](double, double, double) { return 0.0; };
    p.terminal = [lambda, cap](double x, double mu_T) {
        return mu_T > cap ? lambda * std::max(x - cap, 0.0) : 0.0;
    };
    p.sigma = sigma;
    p.x0 = x0;
    return p;
}

}  // namespace meanfield
