// meanfield-lab: batch CLI over the solver suite. One command per process,
// JSON configs in, CSV/JSON artifacts out, a single key=value summary line on
// stdout. Exit codes: 0 success, 2 config parse error, 3 model/numerics
// validation error, 4 nonexistence/blow-up outcome, 5 non-convergence.

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "meanfield/emissions.hpp"
#include "meanfield/io.hpp"
#include "meanfield/mfg_lq.hpp"
#include "meanfield/mfg_pde.hpp"
#include "meanfield/mkv_lq.hpp"
#include "meanfield/nplayer.hpp"
#include "meanfield/rng.hpp"
#include "meanfield/scalar_examples.hpp"

namespace {

using meanfield::json;

constexpr int kExitOk = 0;
constexpr int kExitParse = 2;
constexpr int kExitValidation = 3;
constexpr int kExitNoSolution = 4;
constexpr int kExitNoConvergence = 5;

struct Options {
    std::string config_path;
    std::string out_path;
    std::string format;  // empty: take the config's choice, default csv
    std::optional<std::uint64_t> seed;
};

struct Numerics {
    int n_x = 400;
    double tol = 1e-6;
    double damping = 0.5;
    std::uint64_t seed = 1;
    int n_players = 1000;
    int paths = 100000;
    int repeats = 20;
    int max_iter = 50;
    std::optional<double> x_min, x_max;
};

Numerics numerics_from_config(const json& cfg, const Options& opt) {
    Numerics num;
    if (cfg.contains("numerics")) {
        const json& j = cfg.at("numerics");
        if (j.contains("n_x")) num.n_x = j.at("n_x").get<int>();
        if (j.contains("tol")) num.tol = j.at("tol").get<double>();
        if (j.contains("damping")) num.damping = j.at("damping").get<double>();
        if (j.contains("seed")) num.seed = j.at("seed").get<std::uint64_t>();
        if (j.contains("N")) num.n_players = j.at("N").get<int>();
        if (j.contains("paths")) num.paths = j.at("paths").get<int>();
        if (j.contains("repeats")) num.repeats = j.at("repeats").get<int>();
        if (j.contains("max_iter")) num.max_iter = j.at("max_iter").get<int>();
        if (j.contains("x_min")) num.x_min = j.at("x_min").get<double>();
        if (j.contains("x_max")) num.x_max = j.at("x_max").get<double>();
    }
    if (opt.seed) num.seed = *opt.seed;
    return num;
}

json load_config(const std::string& path, const std::string& command) {
    std::ifstream in(path);
    if (!in) throw json::other_error::create(500, "cannot open config file: " + path, nullptr);
    json cfg = json::parse(in);
    if (cfg.contains("command") && cfg.at("command").get<std::string>() != command)
        throw json::other_error::create(
            500, "config command '" + cfg.at("command").get<std::string>() +
                     "' does not match subcommand '" + command + "'",
            nullptr);
    return cfg;
}

class Summary {
public:
    void add(const std::string& key, double value) {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%.6f", value);
        parts_.push_back(key + "=" + buf);
    }
    void add(const std::string& key, const std::string& value) { parts_.push_back(key + "=" + value); }
    void add(const std::string& key, int value) { parts_.push_back(key + "=" + std::to_string(value)); }
    void print() const {
        for (std::size_t i = 0; i < parts_.size(); ++i)
            std::printf("%s%s", parts_[i].c_str(), i + 1 < parts_.size() ? " " : "\n");
    }

private:
    std::vector<std::string> parts_;
};

std::string artifact_path(const json& cfg, const Options& opt) {
    if (!opt.out_path.empty()) return opt.out_path;
    if (cfg.contains("output") && cfg.at("output").contains("path"))
        return cfg.at("output").at("path").get<std::string>();
    return {};
}

std::string artifact_format(const json& cfg, const Options& opt) {
    if (!opt.format.empty()) return opt.format;
    if (cfg.contains("output") && cfg.at("output").contains("format"))
        return cfg.at("output").at("format").get<std::string>();
    return "csv";
}

void write_lq_solution_artifact(const std::string& path, const std::string& format,
                                const meanfield::LQModel& model,
                                const std::vector<double>& mean_flow,
                                const std::vector<double>& eta, const std::vector<double>& chi,
                                const meanfield::FeedbackPolicy& feedback,
                                const meanfield::MomentPaths& moments) {
    if (path.empty()) return;
    const meanfield::TimeGrid& g = model.grid;
    if (format == "json") {
        json j;
        j["t"] = g.nodes();
        j["mu_bar"] = mean_flow;
        j["eta"] = eta;
        j["chi"] = chi;
        j["feedback_slope"] = feedback.slope.values();
        j["feedback_intercept"] = feedback.intercept.values();
        j["mean"] = moments.mean;
        j["variance"] = moments.variance;
        meanfield::write_json(path, j);
        return;
    }
    meanfield::write_csv(path,
                         {"t", "mu_bar", "eta", "chi", "feedback_slope", "feedback_intercept",
                          "mean", "variance"},
                         {g.nodes(), mean_flow, eta, chi, feedback.slope.values(),
                          feedback.intercept.values(), moments.mean, moments.variance});
}

int cmd_solve_mfg(const Options& opt) {
    const json cfg = load_config(opt.config_path, "solve-mfg");
    const meanfield::LQModel model = meanfield::lq_model_from_json(cfg.at("model"));
    const meanfield::MFGSolution sol = meanfield::solve_mfg(model, /*allow_short_horizon=*/true);
    if (!sol.ok()) {
        std::fprintf(stderr, "no MFG fixed point on this horizon (Riccati blow-up near t=%.6f)\n",
                     *sol.blow_up);
        return kExitNoSolution;
    }
    write_lq_solution_artifact(artifact_path(cfg, opt), artifact_format(cfg, opt), model,
                               sol.mean_flow.values(), sol.eta, sol.chi, sol.feedback,
                               sol.moments);
    Summary s;
    s.add("mfg_mean_T", sol.mean_flow.back());
    s.add("cost", meanfield::mfg_cost(model, sol));
    s.add("fixed_point_residual", sol.fixed_point_residual);
    s.print();
    return kExitOk;
}

int cmd_solve_mkv(const Options& opt) {
    const json cfg = load_config(opt.config_path, "solve-mkv");
    const meanfield::LQModel model = meanfield::lq_model_from_json(cfg.at("model"));
    const meanfield::MKVSolution sol = meanfield::solve_mkv(model);
    if (!sol.ok()) {
        std::fprintf(stderr, "MKV mean system blew up near t=%.6f\n", *sol.blow_up);
        return kExitNoSolution;
    }
    write_lq_solution_artifact(artifact_path(cfg, opt), artifact_format(cfg, opt), model,
                               sol.xbar.values(), sol.eta, sol.chi, sol.feedback, sol.moments);
    Summary s;
    s.add("mkv_mean_T", sol.xbar.back());
    s.add("cost", meanfield::mkv_cost(model, sol.feedback));
    s.add("consistency_residual", sol.consistency_residual);
    s.print();
    return kExitOk;
}

int cmd_compare(const Options& opt) {
    const json cfg = load_config(opt.config_path, "compare");
    const meanfield::LQModel model = meanfield::lq_model_from_json(cfg.at("model"));
    const meanfield::MFGSolution mfg = meanfield::solve_mfg(model, true);
    if (!mfg.ok()) {
        std::fprintf(stderr, "no MFG fixed point on this horizon (Riccati blow-up near t=%.6f)\n",
                     *mfg.blow_up);
        return kExitNoSolution;
    }
    const meanfield::MKVSolution mkv = meanfield::solve_mkv(model);
    if (!mkv.ok()) {
        std::fprintf(stderr, "MKV mean system blew up near t=%.6f\n", *mkv.blow_up);
        return kExitNoSolution;
    }
    double sup_gap = 0.0;
    for (int k = 0; k < model.grid.n_nodes(); ++k)
        sup_gap = std::max(sup_gap, std::abs(mfg.mean_flow[k] - mkv.xbar[k]));
    json rep;
    rep["mfg_mean_T"] = mfg.mean_flow.back();
    rep["mkv_mean_T"] = mkv.xbar.back();
    rep["sup_mean_gap"] = sup_gap;
    rep["mfg_cost_under_mkv_objective"] = meanfield::mkv_cost(model, mfg.feedback);
    rep["mkv_cost"] = meanfield::mkv_cost(model, mkv.feedback);
    const std::string path = artifact_path(cfg, opt);
    if (!path.empty()) meanfield::write_json(path, rep);
    Summary s;
    s.add("mfg_mean_T", rep["mfg_mean_T"].get<double>());
    s.add("mkv_mean_T", rep["mkv_mean_T"].get<double>());
    s.add("sup_mean_gap", sup_gap);
    s.add("mfg_cost_under_mkv_objective", rep["mfg_cost_under_mkv_objective"].get<double>());
    s.add("mkv_cost", rep["mkv_cost"].get<double>());
    s.print();
    return kExitOk;
}

int cmd_examples(const Options& opt) {
    const json cfg = load_config(opt.config_path, "examples");
    double r = 1.0, T = 1.0, x0 = 1.0;
    if (cfg.contains("examples")) {
        const json& j = cfg.at("examples");
        if (j.contains("r")) r = j.at("r").get<double>();
        if (j.contains("T")) T = j.at("T").get<double>();
        if (j.contains("x0")) x0 = j.at("x0").get<double>();
    }
    using meanfield::LimitMode;
    std::ostringstream csv;
    csv << "example,mode,index,root,existence,margin\n";
    auto emit = [&](const std::string& name, const meanfield::FixedPointReport& rep) {
        if (rep.roots.empty())
            csv << name << "," << to_string(rep.mode) << ",0,nan," << to_string(rep.existence)
                << "," << meanfield::format_number(rep.solvability_margin) << "\n";
        for (std::size_t i = 0; i < rep.roots.size(); ++i)
            csv << name << "," << to_string(rep.mode) << "," << i << ","
                << meanfield::format_number(rep.roots[i]) << "," << to_string(rep.existence)
                << "," << meanfield::format_number(rep.solvability_margin) << "\n";
    };
    auto gamma_sin = [r](double u) { return r * std::sin(u); };
    auto gamma_sin_prime = [r](double u) { return r * std::cos(u); };
    auto gamma_lin = [r](double u) { return r * u; };
    for (LimitMode mode : {LimitMode::mfg, LimitMode::mkv}) {
        emit("linear_terminal", meanfield::linear_terminal(r, T, x0, mode));
        emit("quadratic_terminal", meanfield::quadratic_terminal(r, T, x0, mode));
        emit("general_linear_sin",
             meanfield::general_linear_terminal(gamma_sin, gamma_sin_prime, T, x0, mode));
        const double mean_T = meanfield::additive_running_mean(T, x0, mode, T);
        csv << "additive_running_mean_T," << to_string(mode) << ",0,"
            << meanfield::format_number(mean_T) << ",unique,nan\n";
        csv << "lq_zero_terminal_mean," << to_string(mode) << ",0,"
            << meanfield::format_number(x0) << ",unique,nan\n";
    }
    emit("quadratic_cost", meanfield::quadratic_cost_mfg(gamma_lin, T, x0));

    const std::string path = artifact_path(cfg, opt);
    if (!path.empty()) {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw std::runtime_error("cannot open " + path);
        out << csv.str();
    } else {
        std::fputs(csv.str().c_str(), stdout);
    }
    const auto lin_mfg = meanfield::linear_terminal(r, T, x0, LimitMode::mfg);
    const auto lin_mkv = meanfield::linear_terminal(r, T, x0, LimitMode::mkv);
    Summary s;
    s.add("linear_mfg", lin_mfg.roots.empty() ? std::nan("") : lin_mfg.roots[0]);
    s.add("linear_mkv", lin_mkv.roots.empty() ? std::nan("") : lin_mkv.roots[0]);
    s.add("cosh_mfg_T", meanfield::additive_running_mean(T, x0, LimitMode::mfg, T));
    s.add("cosh_mkv_T", meanfield::additive_running_mean(T, x0, LimitMode::mkv, T));
    s.print();
    return kExitOk;
}

int cmd_emissions(const Options& opt) {
    const json cfg = load_config(opt.config_path, "emissions");
    const meanfield::EmissionsModel model = meanfield::emissions_model_from_json(cfg.at("model"));
    const Numerics num = numerics_from_config(cfg, opt);
    const meanfield::RegimeReport rep = meanfield::classify_regime(model);
    const bool bau = rep.regime == meanfield::EmissionsRegime::bau;
    const meanfield::EmissionsSimulation sim =
        meanfield::simulate_emissions(model, num.paths, num.seed, /*zero_feedback=*/bau);
    json j;
    j["regime"] = to_string(rep.regime);
    j["prob_exceed"] = rep.prob_exceed;
    j["mean_T"] = rep.mean_T;
    j["fixed_point_ok"] = rep.fixed_point_ok;
    j["delta"] = rep.delta;
    j["singular"] = rep.singular;
    j["simulation"] = {{"prob_exceed", sim.prob_exceed}, {"prob_se", sim.prob_se},
                       {"mean_T", sim.mean_T},           {"mean_se", sim.mean_se},
                       {"n_paths", sim.n_paths},         {"n_steps", sim.n_steps},
                       {"seed", sim.seed}};
    const std::string path = artifact_path(cfg, opt);
    if (!path.empty()) meanfield::write_json(path, j);
    Summary s;
    s.add("regime", std::string(to_string(rep.regime)));
    s.add("prob_exceed", rep.prob_exceed);
    s.add("mean_T", rep.mean_T);
    s.add("sim_prob_exceed", sim.prob_exceed);
    s.add("fixed_point_ok", rep.fixed_point_ok ? 1 : 0);
    s.print();
    return kExitOk;
}

int cmd_simulate(const Options& opt) {
    const json cfg = load_config(opt.config_path, "simulate");
    const meanfield::LQModel model = meanfield::lq_model_from_json(cfg.at("model"));
    const Numerics num = numerics_from_config(cfg, opt);

    std::string policy_name = "mfg";
    bool do_social = true, do_nash = false;
    int n_deviations = 20;
    double deviation_scale = 0.1;
    if (cfg.contains("simulate")) {
        const json& j = cfg.at("simulate");
        if (j.contains("policy")) policy_name = j.at("policy").get<std::string>();
        if (j.contains("social")) do_social = j.at("social").get<bool>();
        if (j.contains("nash")) do_nash = j.at("nash").get<bool>();
        if (j.contains("n_deviations")) n_deviations = j.at("n_deviations").get<int>();
        if (j.contains("deviation_scale")) deviation_scale = j.at("deviation_scale").get<double>();
    }
    if (policy_name != "mfg" && policy_name != "mkv")
        throw std::invalid_argument("simulate: policy must be 'mfg' or 'mkv'");

    const meanfield::MFGSolution mfg = meanfield::solve_mfg(model, true);
    if (!mfg.ok()) {
        std::fprintf(stderr, "no MFG fixed point on this horizon (Riccati blow-up near t=%.6f)\n",
                     *mfg.blow_up);
        return kExitNoSolution;
    }
    const meanfield::MKVSolution mkv = meanfield::solve_mkv(model);
    if (!mkv.ok()) {
        std::fprintf(stderr, "MKV mean system blew up near t=%.6f\n", *mkv.blow_up);
        return kExitNoSolution;
    }
    const meanfield::FeedbackPolicy& policy =
        policy_name == "mfg" ? mfg.feedback : mkv.feedback;
    const meanfield::MeanFlow& reference = policy_name == "mfg" ? mfg.mean_flow : mkv.xbar;

    meanfield::SimulationConfig sim_cfg{num.n_players, model.grid.n_steps(), num.seed,
                                        num.repeats};
    const meanfield::EnsembleStats stats =
        meanfield::simulate_game(model, policy, sim_cfg, &reference);

    json j;
    j["config"] = {{"N", num.n_players},     {"n_steps", model.grid.n_steps()},
                   {"seed", num.seed},       {"repeats", num.repeats},
                   {"policy", policy_name}};
    j["stats"] = {{"empirical_mean_T", stats.empirical_mean_flow.back()},
                  {"chaos_error", stats.chaos_error},
                  {"per_player_cost", stats.per_player_cost},
                  {"cost_se", stats.cost_se}};
    Summary s;
    s.add("chaos_error", stats.chaos_error);
    s.add("per_player_cost", stats.per_player_cost);
    s.add("cost_se", stats.cost_se);

    if (do_social) {
        const meanfield::SocialCostReport sc =
            meanfield::social_cost_comparison(model, mfg.feedback, mkv.feedback, sim_cfg);
        j["social"] = {{"cost_mfg", sc.cost_first},
                       {"cost_mkv", sc.cost_second},
                       {"difference", sc.difference},
                       {"se", sc.se}};
        s.add("social_difference", sc.difference);
    }
    if (do_nash) {
        std::vector<meanfield::FeedbackPolicy> deviations;
        deviations.reserve(n_deviations);
        const std::uint64_t key = meanfield::stream_key(num.seed, 0x64657669617465ULL);
        for (int d = 0; d < n_deviations; ++d) {
            const double ds = deviation_scale * (2.0 * meanfield::counter_uniform(key, 2 * d) - 1.0);
            const double dc =
                deviation_scale * (2.0 * meanfield::counter_uniform(key, 2 * d + 1) - 1.0);
            deviations.push_back(policy.perturbed(model.grid, ds, dc));
        }
        const meanfield::NashGapReport ng = meanfield::nash_gap(model, policy, deviations, sim_cfg);
        j["nash"] = {{"gap", ng.gap}, {"se", ng.se}, {"best_deviation", ng.best_deviation}};
        s.add("nash_gap", ng.gap);
    }
    const std::string path = artifact_path(cfg, opt);
    if (!path.empty()) meanfield::write_json(path, j);
    s.print();
    return kExitOk;
}

int cmd_oracle(const Options& opt) {
    const json cfg = load_config(opt.config_path, "oracle");
    const Numerics num = numerics_from_config(cfg, opt);
    std::string problem_name = "lq";
    if (cfg.contains("problem")) problem_name = cfg.at("problem").get<std::string>();

    meanfield::ScalarMeanProblem problem;
    std::optional<meanfield::TimeGrid> tg;
    if (problem_name == "lq") {
        const meanfield::LQModel model = meanfield::lq_model_from_json(cfg.at("model"));
        tg = model.grid;
        problem = meanfield::lq_problem(model);
    } else if (problem_name == "additive-running") {
        const json& m = cfg.at("model");
        tg = meanfield::TimeGrid(m.at("T").get<double>(), m.at("n_steps").get<int>());
        problem = meanfield::additive_running_problem(m.at("sigma").get<double>(),
                                                      m.at("x0").get<double>());
    } else if (problem_name == "emissions") {
        const json& m = cfg.at("model");
        const meanfield::EmissionsModel em = meanfield::emissions_model_from_json(m);
        tg = meanfield::TimeGrid(em.horizon, m.at("n_steps").get<int>());
        problem = meanfield::emissions_problem(em.lambda, em.cap, em.sigma, em.x0);
    } else {
        throw std::invalid_argument("oracle: unknown problem '" + problem_name + "'");
    }

    meanfield::SpaceGrid sg =
        (num.x_min && num.x_max)
            ? meanfield::SpaceGrid(*num.x_min, *num.x_max, num.n_x)
            : meanfield::default_domain(problem.x0, problem.sigma, tg->horizon(),
                                        std::abs(problem.x0) + 1.0, num.n_x);
    const meanfield::PicardResult res =
        meanfield::picard_solve(problem, *tg, sg, num.damping, num.tol, num.max_iter);

    Summary s;
    s.add("converged", res.converged ? 1 : 0);
    s.add("iterations", res.iterations);
    s.add("mean_T", res.mean_flow.back());
    s.add("residual", res.residuals.back());
    if (!res.converged) {
        s.print();
        std::fprintf(stderr, "picard iteration did not converge in %d iterations\n",
                     res.iterations);
        return kExitNoConvergence;
    }
    const std::string path = artifact_path(cfg, opt);
    if (!path.empty()) {
        const std::string format = artifact_format(cfg, opt);
        if (format == "json") {
            json j;
            j["t"] = tg->nodes();
            j["mean_flow"] = res.mean_flow.values();
            j["residuals"] = res.residuals;
            j["iterations"] = res.iterations;
            meanfield::write_json(path, j);
        } else {
            // Long-format (t, x, v, density) dump for plotting.
            std::vector<double> tcol, xcol, vcol, dcol;
            const std::size_t total =
                static_cast<std::size_t>(tg->n_nodes()) * static_cast<std::size_t>(sg.n_x);
            tcol.reserve(total);
            xcol.reserve(total);
            vcol.reserve(total);
            dcol.reserve(total);
            for (int k = 0; k < tg->n_nodes(); ++k)
                for (int i = 0; i < sg.n_x; ++i) {
                    tcol.push_back(tg->t(k));
                    xcol.push_back(sg.center(i));
                    vcol.push_back(res.value.values[k][i]);
                    dcol.push_back(res.density.values[k][i]);
                }
            meanfield::write_csv(path, {"t", "x", "v", "density"}, {tcol, xcol, vcol, dcol});
        }
    }
    s.print();
    return kExitOk;
}

int dispatch(const std::string& command, const Options& opt) {
    try {
        if (command == "solve-mfg") return cmd_solve_mfg(opt);
        if (command == "solve-mkv") return cmd_solve_mkv(opt);
        if (command == "compare") return cmd_compare(opt);
        if (command == "examples") return cmd_examples(opt);
        if (command == "emissions") return cmd_emissions(opt);
        if (command == "simulate") return cmd_simulate(opt);
        if (command == "oracle") return cmd_oracle(opt);
        std::fprintf(stderr, "unknown command: %s\n", command.c_str());
        return kExitParse;
    } catch (const json::exception& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kExitParse;
    } catch (const meanfield::CflError& e) {
        std::fprintf(stderr, "numerics error: %s\n", e.what());
        return kExitValidation;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "validation error: %s\n", e.what());
        return kExitValidation;
    } catch (const std::domain_error& e) {
        std::fprintf(stderr, "validation error: %s\n", e.what());
        return kExitValidation;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"meanfield-lab: MFG vs McKean-Vlasov solver suite"};
    app.require_subcommand(1);

    Options opt;
    std::uint64_t seed_arg = 0;
    bool seed_given = false;
    const std::vector<std::string> commands = {"solve-mfg", "solve-mkv", "compare", "examples",
                                               "emissions", "simulate",  "oracle"};
    for (const std::string& name : commands) {
        CLI::App* sub = app.add_subcommand(name);
        sub->add_option("--config", opt.config_path, "JSON experiment config")->required();
        sub->add_option("--out", opt.out_path, "artifact output path");
        sub->add_option("--format", opt.format, "artifact format: csv or json")
            ->check(CLI::IsMember({"csv", "json"}));
        sub->add_option("--seed", seed_arg, "override the config RNG seed")
            ->each([&](const std::string&) { seed_given = true; });
    }
    CLI11_PARSE(app, argc, argv);
    if (seed_given) opt.seed = seed_arg;
    return dispatch(app.get_subcommands().front()->get_name(), opt);
}
