#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "meanfield/cost.hpp"
#include "meanfield/mfg_lq.hpp"
#include "meanfield/rng.hpp"

using namespace meanfield;

namespace {

LQModel simple_example(const TimeGrid& g, double q, double qbar, double sigma, double x0) {
    return LQModel(g, 0, 0, 1, 0, 0, 0, 1, q, qbar, sigma, x0);
}

// Independent oracle for the aggregated forward-backward system: RK4 on the
// untransformed pair with a shooting match of the terminal condition (the
// system is linear, so two trial integrations pin the initial adjoint value).
double shooting_mean_T(const LQModel& model, bool mkv_aggregation, int n_steps) {
    const double T = model.grid.horizon();
    auto rhs = [&](double t, double mu, double y, double& dmu, double& dy) {
        const double a = model.a.at(t), abar = model.abar.at(t), b = model.b.at(t);
        const double m = model.m.at(t), mbar = model.mbar.at(t), n = model.n.at(t);
        dmu = (a + abar) * mu - b * b / n * y + model.beta.at(t);
        dy = mkv_aggregation ? -((a + abar) * y + (m + mbar) * (m + mbar) * mu)
                             : -(a * y + m * (m + mbar) * mu);
    };
    auto integrate = [&](double y0, double& muT, double& yT) {
        const double h = T / n_steps;
        double mu = model.x0, y = y0;
        for (int k = 0; k < n_steps; ++k) {
            const double t = k * h;
            double k1m, k1y, k2m, k2y, k3m, k3y, k4m, k4y;
            rhs(t, mu, y, k1m, k1y);
            rhs(t + h / 2, mu + h / 2 * k1m, y + h / 2 * k1y, k2m, k2y);
            rhs(t + h / 2, mu + h / 2 * k2m, y + h / 2 * k2y, k3m, k3y);
            rhs(t + h, mu + h * k3m, y + h * k3y, k4m, k4y);
            mu += h / 6 * (k1m + 2 * k2m + 2 * k3m + k4m);
            y += h / 6 * (k1y + 2 * k2y + 2 * k3y + k4y);
        }
        muT = mu;
        yT = y;
    };
    const double q = model.q, qbar = model.qbar;
    const double slope = mkv_aggregation ? (q + qbar) * (q + qbar) : q * (q + qbar);
    double mu0, y0T, mu1, y1T;
    integrate(0.0, mu0, y0T);
    integrate(1.0, mu1, y1T);
    const double g0 = y0T - slope * mu0;
    const double g1 = y1T - slope * mu1;
    const double ystar = -g0 / (g1 - g0);
    double muT, yT;
    integrate(ystar, muT, yT);
    return muT;
}

}  // namespace

TEST_CASE("simple-example fixed point reproduces the closed form") {
    const TimeGrid g = make_grid(1.0, 400);

    SECTION("benchmark pairs") {
        const MeanSystemSolution ms = solve_mean_fixed_point(simple_example(g, 1, 1, 0.3, 1));
        REQUIRE(ms.ok());
        REQUIRE(ms.mean.back() == Catch::Approx(1.0 / 3.0).epsilon(1e-10));
        REQUIRE(ms.adjoint.back() ==
                Catch::Approx(1.0 * 2.0 * ms.mean.back()).epsilon(1e-9));  // q(q+qbar) mu_T
    }

    SECTION("5x5 regression grid, relative error 1e-8") {
        const double qs[5] = {0.5, 1.0, 1.5, 2.0, 2.5};
        const double qbars[5] = {-0.25, 0.0, 0.5, 1.0, 2.0};
        for (double q : qs)
            for (double qbar : qbars) {
                REQUIRE(q * (q + qbar) >= 0.0);
                const MeanSystemSolution ms =
                    solve_mean_fixed_point(simple_example(g, q, qbar, 0.3, 1));
                const double want = 1.0 / (1.0 + q * (q + qbar));
                REQUIRE(ms.mean.back() == Catch::Approx(want).epsilon(1e-8));
            }
    }

    SECTION("zero costs, zero drift: nothing moves") {
        const MeanSystemSolution ms = solve_mean_fixed_point(simple_example(g, 0, 0.7, 0.3, 1));
        for (int k = 0; k < g.n_nodes(); ++k) {
            REQUIRE(ms.adjoint[k] == 0.0);
            REQUIRE(ms.mean[k] == 1.0);
        }
    }
}

TEST_CASE("coupled model against the shooting oracle") {
    const TimeGrid g = make_grid(1.0, 400);
    const LQModel model(g, 0.1, 0.2, 1, 0, 0.5, 0.5, 1, 1.0, 0.5, 0.3, 2.0);
    const double frozen = 0.8178664116467527;  // 2e5-step shooting reference
    REQUIRE(shooting_mean_T(model, false, 200000) == Catch::Approx(frozen).margin(1e-12));
    const MeanSystemSolution ms = solve_mean_fixed_point(model);
    REQUIRE(ms.mean.back() == Catch::Approx(frozen).margin(1e-9));
}

TEST_CASE("full MFG solve") {
    const TimeGrid g = make_grid(1.0, 400);

    SECTION("feedback of the simple example") {
        const MFGSolution sol = solve_mfg(simple_example(g, 1, 0, 0.3, 1));
        REQUIRE(sol.ok());
        for (int k = 0; k <= g.n_steps(); k += 50) {
            const double want = -1.0 / (1.0 + (1.0 - g.t(k)));
            REQUIRE(sol.feedback.slope[k] == Catch::Approx(want).margin(1e-9));
            REQUIRE(sol.feedback.intercept[k] == 0.0);  // r = q qbar mu_T = 0
        }
        REQUIRE(sol.fixed_point_residual < 1e-6);
        REQUIRE(sol.chi_cross_gap < 1e-8);
    }

    SECTION("no incentive to act without costs") {
        const MFGSolution sol = solve_mfg(simple_example(g, 0, 0, 0.3, 1));
        for (int k = 0; k < g.n_nodes(); ++k) {
            REQUIRE(sol.feedback.slope[k] == 0.0);
            REQUIRE(sol.feedback.intercept[k] == 0.0);
            REQUIRE(sol.moments.mean[k] == 1.0);
        }
    }

    SECTION("negative qbar within the sign hypotheses") {
        const MFGSolution sol = solve_mfg(simple_example(g, 1, -0.5, 0.3, 1));
        REQUIRE(sol.ok());
        REQUIRE(sol.mean_flow.back() == Catch::Approx(2.0 / 3.0).epsilon(1e-9));
    }

    SECTION("self-consistency on a coupled model") {
        const LQModel model(g, 0.1, 0.2, 1, 0.1, 0.5, 0.5, 1, 1.0, 0.5, 0.4, 2.0);
        const MFGSolution sol = solve_mfg(model);
        REQUIRE(sol.ok());
        REQUIRE(sol.fixed_point_residual < 1e-6);
        REQUIRE(sol.chi_cross_gap < 1e-8);
    }
}

TEST_CASE("short horizons outside the sign hypotheses") {
    // q(q+qbar) = -1: the closed-form denominator is 1 - T.
    SECTION("opt-in is required") {
        const TimeGrid g = make_grid(1.0, 100);
        REQUIRE_THROWS_AS(solve_mfg(simple_example(g, 1, -2, 0.3, 1)), std::invalid_argument);
    }
    SECTION("small horizon still has a fixed point") {
        const TimeGrid g = make_grid(0.5, 200);
        const MFGSolution sol = solve_mfg(simple_example(g, 1, -2, 0.3, 1), true);
        REQUIRE(sol.ok());
        REQUIRE(sol.mean_flow.back() == Catch::Approx(2.0).epsilon(1e-8));
    }
    SECTION("degenerate horizon reports nonexistence") {
        const TimeGrid g = make_grid(1.0, 400);
        const MFGSolution sol = solve_mfg(simple_example(g, 1, -2, 0.3, 1), true);
        REQUIRE_FALSE(sol.ok());
        REQUIRE(sol.blow_up.has_value());
    }
}

TEST_CASE("equilibrium cost") {
    const TimeGrid g = make_grid(1.0, 400);

    SECTION("zero costs give zero") {
        const MFGSolution sol = solve_mfg(simple_example(g, 0, 0, 1.0, 1));
        REQUIRE(mfg_cost(simple_example(g, 0, 0, 1.0, 1), sol) == 0.0);
    }

    SECTION("deterministic limit: J = 1/4") {
        const LQModel model = simple_example(g, 1, 0, 0.0, 1);
        const MFGSolution sol = solve_mfg(model);
        REQUIRE(mfg_cost(model, sol) == Catch::Approx(0.25).margin(1e-10));
    }

    SECTION("noise adds cost, Monte Carlo agreement") {
        const LQModel det = simple_example(g, 1, 0, 0.0, 1);
        const LQModel noisy = simple_example(g, 1, 0, 1.0, 1);
        const MFGSolution sol = solve_mfg(noisy);
        const double j_noisy = mfg_cost(noisy, sol);
        REQUIRE(j_noisy > mfg_cost(det, solve_mfg(det)));

        // Path-wise oracle: single player against the frozen flow.
        const int paths = 20000, n = g.n_steps();
        const double dt = g.dt(), rdt = std::sqrt(dt);
        double sum = 0.0, sum_sq = 0.0;
        for (int p = 0; p < paths; ++p) {
            const std::uint64_t key = stream_key(99, p);
            double x = 1.0, cost = 0.0;
            for (int k = 0; k <= n; ++k) {
                const double alpha = sol.feedback.eval(k, x);
                const double w = (k == 0 || k == n) ? 0.5 * dt : dt;
                cost += w * 0.5 * alpha * alpha;
                if (k < n)
                    x += alpha * dt + rdt * counter_gaussian(key, k);
                else
                    cost += 0.5 * x * x;  // q = 1, qbar = 0
            }
            sum += cost;
            sum_sq += cost * cost;
        }
        const double mc = sum / paths;
        const double se = std::sqrt((sum_sq / paths - mc * mc) / paths);
        REQUIRE(std::abs(mc - j_noisy) < 3.0 * se);
    }
}

TEST_CASE("no affine deviation beats the equilibrium against the frozen flow") {
    const TimeGrid g = make_grid(1.0, 400);
    const LQModel model(g, 0.1, 0.2, 1, 0.0, 0.5, 0.5, 1, 1.0, 0.5, 0.4, 2.0);
    const MFGSolution sol = solve_mfg(model);
    const double best = lq_policy_cost(model, sol.feedback, &sol.mean_flow).total;
    const std::uint64_t key = stream_key(2024, 1);
    for (int i = 0; i < 20; ++i) {
        const double ds = 0.2 * (2.0 * counter_uniform(key, 2 * i) - 1.0);
        const double dc = 0.2 * (2.0 * counter_uniform(key, 2 * i + 1) - 1.0);
        const FeedbackPolicy p = sol.feedback.perturbed(g, ds, dc);
        REQUIRE(lq_policy_cost(model, p, &sol.mean_flow).total >= best - 1e-8);
    }
}
