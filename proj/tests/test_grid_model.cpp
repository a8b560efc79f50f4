#include <catch2/catch_amalgamated.hpp>

#include "meanfield/lq_model.hpp"
#include "meanfield/rng.hpp"
#include "meanfield/time_grid.hpp"

using namespace meanfield;

namespace {

LQModel random_valid_model(const TimeGrid& g, std::uint64_t salt) {
    const std::uint64_t key = stream_key(42, salt);
    auto u = [&](int i, double lo, double hi) {
        return lo + (hi - lo) * counter_uniform(key, i);
    };
    return LQModel(g, u(0, -1, 1), u(1, -1, 1), u(2, 0.5, 2), u(3, -1, 1), u(4, -1, 1),
                   u(5, -1, 1), u(6, 0.5, 2), u(7, -1.5, 1.5), u(8, -1.5, 1.5), u(9, 0, 1),
                   u(10, -2, 2));
}

}  // namespace

TEST_CASE("uniform grid arithmetic") {
    const TimeGrid g = make_grid(1.0, 4);
    const std::vector<double> want = {0.0, 0.25, 0.5, 0.75, 1.0};
    REQUIRE(g.nodes() == want);
    REQUIRE(g.t(g.n_steps()) == 1.0);  // last node pinned exactly

    REQUIRE(make_grid(2.0, 1000).dt() == Catch::Approx(0.002).margin(1e-15));

    REQUIRE_THROWS_AS(make_grid(0.0, 10), std::invalid_argument);
    REQUIRE_THROWS_AS(make_grid(-1.0, 10), std::invalid_argument);
    REQUIRE_THROWS_AS(make_grid(1.0, 1), std::invalid_argument);

    for (int k = 0; k < g.n_steps(); ++k) REQUIRE(g.t(k) < g.t(k + 1));
}

TEST_CASE("sampled coefficients broadcast and interpolate") {
    const TimeGrid g = make_grid(2.0, 4);
    const Sampled c(g, 3.5);
    REQUIRE(c.n_nodes() == 5);
    REQUIRE(c.at(1.234) == 3.5);

    Sampled ramp(g, std::vector<double>{0.0, 1.0, 2.0, 3.0, 4.0});
    REQUIRE(ramp.at(0.25) == Catch::Approx(0.5));
    REQUIRE(ramp.mid(1) == Catch::Approx(1.5));
    REQUIRE(ramp.at(-1.0) == 0.0);
    REQUIRE(ramp.at(5.0) == 4.0);

    REQUIRE_THROWS_AS(Sampled(g, std::vector<double>{1.0, 2.0}), std::invalid_argument);
}

TEST_CASE("model validation") {
    const TimeGrid g = make_grid(1.0, 8);
    REQUIRE_NOTHROW(LQModel(g, 0, 0, 1, 0, 0, 0, 1, 1, 0, 0.5, 1));
    // positivity of b and n on every node
    REQUIRE_THROWS_AS(LQModel(g, 0, 0, 0.0, 0, 0, 0, 1, 1, 0, 0.5, 1), std::invalid_argument);
    REQUIRE_THROWS_AS(LQModel(g, 0, 0, 1, 0, 0, 0, -0.1, 1, 0, 0.5, 1), std::invalid_argument);
    std::vector<double> dip(g.n_nodes(), 1.0);
    dip[3] = -0.5;
    REQUIRE_THROWS_AS(LQModel(g, Sampled(g, 0.0), Sampled(g, 0.0), Sampled(g, dip),
                              Sampled(g, 0.0), Sampled(g, 0.0), Sampled(g, 0.0), Sampled(g, 1.0),
                              1, 0, 0.5, 1),
                      std::invalid_argument);
    REQUIRE_THROWS_AS(LQModel(g, 0, 0, 1, 0, 0, 0, 1, 1, 0, -0.5, 1), std::invalid_argument);
    // sigma = 0 is the deterministic limit, accepted
    REQUIRE_NOTHROW(LQModel(g, 0, 0, 1, 0, 0, 0, 1, 1, 0, 0.0, 1));
}

TEST_CASE("reduction to the linear FBSDE table, frozen flow") {
    const TimeGrid g = make_grid(1.0, 10);

    SECTION("drift equal to the control, quadratic control cost") {
        const LQModel model(g, 0, 0, 1, 0, 0, 0, 1, 1, 0, 0.5, 1);
        const ReducedCoefficients rc = reduce_mfg(model, MeanFlow(g, 0.7));
        for (int k = 0; k < g.n_nodes(); ++k) {
            REQUIRE(rc.fx[k] == 0.0);
            REQUIRE(rc.fy[k] == -1.0);
            REQUIRE(rc.fc[k] == 0.0);
            REQUIRE(rc.gx[k] == 0.0);
            REQUIRE(rc.gc[k] == 0.0);
        }
        REQUIRE(rc.terminal_slope == 1.0);
        REQUIRE(rc.terminal_offset == 0.0);
    }

    SECTION("running interaction vanishes with m = 0") {
        const LQModel model(g, 0, 0, 1, 0, 0.0, 5.0, 1, 1, 0, 0.5, 1);
        const ReducedCoefficients rc = reduce_mfg(model, MeanFlow(g, 2.0));
        for (int k = 0; k < g.n_nodes(); ++k) REQUIRE(rc.gc[k] == 0.0);
    }

    SECTION("affine forward term") {
        const LQModel model(g, 1.0, 2.0, 1, 0.5, 0, 0, 1, 1, 0, 0.5, 1);
        const ReducedCoefficients rc = reduce_mfg(model, MeanFlow(g, 3.0));
        for (int k = 0; k < g.n_nodes(); ++k) REQUIRE(rc.fc[k] == Catch::Approx(6.5));
    }

    SECTION("grid mismatch is rejected") {
        const LQModel model(g, 0, 0, 1, 0, 0, 0, 1, 1, 0, 0.5, 1);
        REQUIRE_THROWS_AS(reduce_mfg(model, MeanFlow(make_grid(1.0, 20), 0.0)),
                          std::invalid_argument);
    }
}

TEST_CASE("reduction for the controlled MKV problem") {
    const TimeGrid g = make_grid(1.0, 10);

    SECTION("all interaction products vanish") {
        const LQModel model(g, 0.3, 0.0, 1, 0, 0.4, 0.0, 1, 1, 0, 0.5, 1);
        const ReducedCoefficients rc = reduce_mkv(model, MeanFlow(g, 2.0), MeanFlow(g, 1.0));
        for (int k = 0; k < g.n_nodes(); ++k) REQUIRE(rc.gc[k] == 0.0);
    }

    SECTION("terminal offset differs between the two reductions") {
        const LQModel model(g, 0, 0, 1, 0, 0, 0, 1, 1.0, 1.0, 0.5, 1);
        const MeanFlow unit(g, 1.0);
        const ReducedCoefficients mkv = reduce_mkv(model, unit, MeanFlow(g, 0.0));
        REQUIRE(mkv.terminal_offset == 3.0);  // qbar (2q + qbar) xbar_T
        const ReducedCoefficients mfg = reduce_mfg(model, unit);
        REQUIRE(mfg.terminal_offset == 1.0);  // q qbar mu_T
        REQUIRE(mkv.terminal_offset != mfg.terminal_offset);
    }
}

TEST_CASE("the two reductions agree except in the interaction terms") {
    const TimeGrid g = make_grid(1.5, 16);
    for (std::uint64_t trial = 0; trial < 40; ++trial) {
        const LQModel model = random_valid_model(g, trial);
        const MeanFlow flow(g, 0.8);
        const ReducedCoefficients a = reduce_mfg(model, flow);
        const ReducedCoefficients b = reduce_mkv(model, flow, MeanFlow(g, -0.3));
        for (int k = 0; k < g.n_nodes(); ++k) {
            REQUIRE(a.fx[k] == b.fx[k]);
            REQUIRE(a.fy[k] == b.fy[k]);
            REQUIRE(a.fc[k] == b.fc[k]);  // same flow, same affine forward term
            REQUIRE(a.gx[k] == b.gx[k]);
            // right sign conditions
            REQUIRE(a.fy[k] < 0.0);
            REQUIRE(a.gx[k] <= 0.0);
        }
        REQUIRE(a.terminal_slope == b.terminal_slope);
        REQUIRE(a.terminal_slope >= 0.0);
    }
}
