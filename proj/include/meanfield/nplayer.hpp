#pragma once

// Finite-N player simulator: Euler-Maruyama on the model grid with the
// empirical mean recomputed every step. Per-(repeat, player) counter-based
// streams plus permutation-invariant reductions (sorted summation) make every
// statistic bit-identical across thread counts and player relabelings.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "meanfield/cost.hpp"
#include "meanfield/lq_model.hpp"
#include "meanfield/policy.hpp"
#include "meanfield/rng.hpp"

namespace meanfield {

struct SimulationConfig {
    int n_players = 2;
    int n_steps = 0;  // must match the model grid
    std::uint64_t seed = 0;
    int n_repeats = 1;

    void validate(const TimeGrid& grid) const {
        if (n_players < 2) throw std::invalid_argument("SimulationConfig: need at least 2 players");
        if (n_repeats < 1) throw std::invalid_argument("SimulationConfig: need at least 1 repeat");
        if (n_steps != grid.n_steps())
            throw std::invalid_argument(
                "SimulationConfig: step count must equal the model grid (feedback tables are "
                "reused without interpolation)");
    }
};

struct EnsembleStats {
    std::vector<double> empirical_mean_flow;  // averaged over repeats
    double chaos_error = 0.0;                 // sup_t |empirical mean - limit mean|
    double per_player_cost = 0.0;
    double cost_se = 0.0;
    double mean_T_se = 0.0;  // replication standard error of the terminal empirical mean
};

namespace nplayer_detail {

inline int worker_count() {
    int hw = static_cast<int>(std::thread::hardware_concurrency());
    if (hw < 1) hw = 1;
    if (const char* env = std::getenv("MEANFIELD_THREADS")) {
        const int cap = std::atoi(env);
        if (cap >= 1) hw = std::min(hw, cap);
    }
    return hw;
}

template <typename F>
void parallel_repeats(int n_repeats, F&& body) {
    const int workers = std::min(worker_count(), n_repeats);
    if (workers <= 1) {
        for (int r = 0; r < n_repeats; ++r) body(r);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (int r = next.fetch_add(1); r < n_repeats; r = next.fetch_add(1)) body(r);
        });
    for (auto& th : pool) th.join();
}

// Order-independent sum: sorting first makes the floating-point result
// invariant under any permutation of the inputs.
inline double invariant_sum(std::vector<double>& scratch) {
    std::sort(scratch.begin(), scratch.end());
    double s = 0.0;
    for (double v : scratch) s += v;
    return s;
}

struct RepeatOutcome {
    std::vector<double> mean_flow;  // per node
    double avg_cost = 0.0;
    double first_player_cost = 0.0;
};

// One game replication. All players follow `base`; if `deviant` is non-null,
// player 0 follows it instead. Stream of player i is (seed, repeat, perm[i]);
// the identity map is used when perm is null.
inline RepeatOutcome run_repeat(const LQModel& model, const FeedbackPolicy& base,
                                const FeedbackPolicy* deviant, int n_players, std::uint64_t seed,
                                int repeat, const std::vector<int>* perm) {
    const TimeGrid& g = model.grid;
    const int n = g.n_steps();
    const double dt = g.dt();
    const double root_dt = std::sqrt(dt);

    std::vector<std::uint64_t> keys(n_players);
    for (int i = 0; i < n_players; ++i) {
        const int stream = perm ? (*perm)[i] : i;
        keys[i] = stream_key(seed, static_cast<std::uint64_t>(repeat),
                             static_cast<std::uint64_t>(stream));
    }

    std::vector<double> x(n_players, model.x0), cost(n_players, 0.0), scratch(n_players);
    RepeatOutcome out;
    out.mean_flow.resize(n + 1);

    for (int k = 0; k <= n; ++k) {
        scratch.assign(x.begin(), x.end());
        const double xbar = invariant_sum(scratch) / n_players;
        out.mean_flow[k] = xbar;

        const double w = (k == 0 || k == n) ? 0.5 * dt : dt;  // trapezoid weight
        for (int i = 0; i < n_players; ++i) {
            const FeedbackPolicy& pol = (deviant && i == 0) ? *deviant : base;
            const double alpha = pol.eval(k, x[i]);
            const double run = model.m[k] * x[i] + model.mbar[k] * xbar;
            cost[i] += w * 0.5 * (model.n[k] * alpha * alpha + run * run);
            if (k < n) {
                const double drift = model.a[k] * x[i] + model.abar[k] * xbar +
                                     model.b[k] * alpha + model.beta[k];
                x[i] += drift * dt + model.sigma * root_dt * counter_gaussian(keys[i], k);
            } else {
                const double term = model.q * x[i] + model.qbar * xbar;
                cost[i] += 0.5 * term * term;
            }
        }
    }
    out.first_player_cost = cost[0];
    scratch.assign(cost.begin(), cost.end());
    out.avg_cost = invariant_sum(scratch) / n_players;
    return out;
}

// Large-population limit of the empirical mean when every player uses the
// same affine policy: the mean of the controlled MKV dynamics.
inline std::vector<double> limit_mean_flow(const LQModel& model, const FeedbackPolicy& policy) {
    return lq_policy_cost(model, policy, nullptr).mean;
}

}  // namespace nplayer_detail

// All players use `policy`; statistics over cfg.n_repeats independent games.
// `reference` overrides the limit mean flow used for the chaos error;
// `stream_perm` relabels the per-player noise streams (exchangeability checks).
inline EnsembleStats simulate_game(const LQModel& model, const FeedbackPolicy& policy,
                                   const SimulationConfig& cfg,
                                   const MeanFlow* reference = nullptr,
                                   const std::vector<int>* stream_perm = nullptr) {
    cfg.validate(model.grid);
    if (policy.n_nodes() != model.grid.n_nodes())
        throw std::invalid_argument("simulate_game: policy not sampled on the model grid");

    const int nn = model.grid.n_nodes();
    std::vector<nplayer_detail::RepeatOutcome> outcomes(cfg.n_repeats);
    nplayer_detail::parallel_repeats(cfg.n_repeats, [&](int r) {
        outcomes[r] = nplayer_detail::run_repeat(model, policy, nullptr, cfg.n_players, cfg.seed,
                                                 r, stream_perm);
    });

    EnsembleStats stats;
    stats.empirical_mean_flow.assign(nn, 0.0);
    double cost_sum = 0.0, cost_sq = 0.0;
    for (const auto& o : outcomes) {
        for (int k = 0; k < nn; ++k) stats.empirical_mean_flow[k] += o.mean_flow[k];
        cost_sum += o.avg_cost;
        cost_sq += o.avg_cost * o.avg_cost;
    }
    for (double& v : stats.empirical_mean_flow) v /= cfg.n_repeats;
    stats.per_player_cost = cost_sum / cfg.n_repeats;
    const double var =
        std::max(0.0, cost_sq / cfg.n_repeats - stats.per_player_cost * stats.per_player_cost);
    stats.cost_se = cfg.n_repeats > 1 ? std::sqrt(var / (cfg.n_repeats - 1)) : 0.0;
    if (cfg.n_repeats > 1) {
        const double mT = stats.empirical_mean_flow.back();
        double vT = 0.0;
        for (const auto& o : outcomes) {
            const double d = o.mean_flow.back() - mT;
            vT += d * d;
        }
        stats.mean_T_se = std::sqrt(vT / (cfg.n_repeats - 1) / cfg.n_repeats);
    }

    std::vector<double> ref;
    if (reference) {
        if (reference->n_nodes() != nn)
            throw std::invalid_argument("simulate_game: reference flow grid mismatch");
        ref = reference->values();
    } else {
        ref = nplayer_detail::limit_mean_flow(model, policy);
    }
    for (int k = 0; k < nn; ++k)
        stats.chaos_error =
            std::max(stats.chaos_error, std::abs(stats.empirical_mean_flow[k] - ref[k]));
    return stats;
}

struct NashGapReport {
    double gap = 0.0;  // max over deviations of (equilibrium cost - deviating cost), player 1
    double se = 0.0;   // standard error of the maximizing deviation's gap
    int best_deviation = -1;
    std::vector<double> per_deviation_gap;
};

// Player 1 tries each deviation while everyone else keeps the equilibrium
// policy; common random numbers across all runs.
inline NashGapReport nash_gap(const LQModel& model, const FeedbackPolicy& equilibrium,
                              const std::vector<FeedbackPolicy>& deviations,
                              const SimulationConfig& cfg) {
    cfg.validate(model.grid);
    if (deviations.empty()) throw std::invalid_argument("nash_gap: deviation list is empty");

    std::vector<double> base_cost(cfg.n_repeats);
    nplayer_detail::parallel_repeats(cfg.n_repeats, [&](int r) {
        base_cost[r] = nplayer_detail::run_repeat(model, equilibrium, nullptr, cfg.n_players,
                                                  cfg.seed, r, nullptr)
                           .first_player_cost;
    });

    NashGapReport rep;
    rep.per_deviation_gap.resize(deviations.size());
    std::vector<double> best_gaps(cfg.n_repeats, 0.0);
    for (std::size_t d = 0; d < deviations.size(); ++d) {
        std::vector<double> gaps(cfg.n_repeats);
        nplayer_detail::parallel_repeats(cfg.n_repeats, [&](int r) {
            const double dev_cost = nplayer_detail::run_repeat(model, equilibrium, &deviations[d],
                                                               cfg.n_players, cfg.seed, r, nullptr)
                                        .first_player_cost;
            gaps[r] = base_cost[r] - dev_cost;
        });
        double s = 0.0;
        for (double v : gaps) s += v;
        const double mean_gap = s / cfg.n_repeats;
        rep.per_deviation_gap[d] = mean_gap;
        if (rep.best_deviation < 0 || mean_gap > rep.gap) {
            rep.gap = mean_gap;
            rep.best_deviation = static_cast<int>(d);
            best_gaps = gaps;
        }
    }
    if (cfg.n_repeats > 1) {
        double var = 0.0;
        for (double v : best_gaps) var += (v - rep.gap) * (v - rep.gap);
        rep.se = std::sqrt(var / (cfg.n_repeats - 1) / cfg.n_repeats);
    }
    return rep;
}

struct SocialCostReport {
    double cost_first = 0.0;   // all players on the first policy
    double cost_second = 0.0;  // all players on the second policy
    double difference = 0.0;   // cost_first - cost_second
    double se = 0.0;           // standard error of the difference
};

// Average per-player cost when the whole population adopts one policy versus
// the other, under common random numbers.
inline SocialCostReport social_cost_comparison(const LQModel& model, const FeedbackPolicy& first,
                                               const FeedbackPolicy& second,
                                               const SimulationConfig& cfg) {
    cfg.validate(model.grid);
    std::vector<double> ca(cfg.n_repeats), cb(cfg.n_repeats);
    nplayer_detail::parallel_repeats(cfg.n_repeats, [&](int r) {
        ca[r] = nplayer_detail::run_repeat(model, first, nullptr, cfg.n_players, cfg.seed, r,
                                           nullptr)
                    .avg_cost;
        cb[r] = nplayer_detail::run_repeat(model, second, nullptr, cfg.n_players, cfg.seed, r,
                                           nullptr)
                    .avg_cost;
    });
    SocialCostReport rep;
    double diff_sum = 0.0;
    for (int r = 0; r < cfg.n_repeats; ++r) {
        rep.cost_first += ca[r];
        rep.cost_second += cb[r];
        diff_sum += ca[r] - cb[r];
    }
    rep.cost_first /= cfg.n_repeats;
    rep.cost_second /= cfg.n_repeats;
    rep.difference = diff_sum / cfg.n_repeats;
    if (cfg.n_repeats > 1) {
        double var = 0.0;
        for (int r = 0; r < cfg.n_repeats; ++r) {
            const double d = ca[r] - cb[r] - rep.difference;
            var += d * d;
        }
        rep.se = std::sqrt(var / (cfg.n_repeats - 1) / cfg.n_repeats);
    }
    return rep;
}

}  // namespace meanfield
