#include <cstdint>
#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "wsg/harness.hpp"
#include "wsg/json_io.hpp"
#include "wsg/strategies.hpp"
#include "wsg/values.hpp"

namespace {

void emit(const std::string& out_path, const std::string& text) {
    if (out_path.empty()) {
        std::cout << text;
    } else {
        wsg::write_text_file(out_path, text);
    }
}

std::vector<wsg::SweepEntry> default_sweep_grid() {
    std::vector<wsg::SweepEntry> entries;
    for (std::int64_t n : {1, 2, 4, 8, 16, 32, 64, 128, 256})
        entries.push_back({"n:" + std::to_string(n), wsg::Evaluation::n_stage(n)});
    for (double lam : {0.5, 0.25, 0.1, 0.01, 0.001})
        entries.push_back({"lambda:" + wsg::format_double(lam), wsg::Evaluation::discounted(lam)});
    return entries;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Solver and experiment harness for stochastic games under weighted payoff evaluations"};
    app.require_subcommand(1);

    std::string game_name;
    std::string eval_desc;
    std::string out_path;
    std::string config_path;
    std::string fault_name = "none";
    std::vector<std::string> eval_list;
    double eps = 1e-9;
    std::uint64_t seed = 1;
    int gen_states = 3, gen_rows = 2, gen_cols = 2;
    int state_index = 0;
    int budget = 200;

    CLI::App* gen = app.add_subcommand("gen", "generate a random game spec as JSON");
    gen->add_option("--seed", seed, "rng seed")->required();
    gen->add_option("--states", gen_states, "number of states");
    gen->add_option("--rows", gen_rows, "row actions");
    gen->add_option("--cols", gen_cols, "column actions");
    gen->add_option("--out", out_path, "output path (default stdout)");

    CLI::App* solve = app.add_subcommand("solve", "weighted value of a game under an evaluation");
    solve->add_option("--game", game_name, "corpus name or game JSON path")->required();
    solve->add_option("--eval", eval_desc, "evaluation descriptor")->required();
    solve->add_option("--eps", eps, "value accuracy");
    solve->add_option("--out", out_path, "output path (default stdout)");

    CLI::App* sweep = app.add_subcommand("sweep", "values across an evaluation grid as CSV");
    sweep->add_option("--game", game_name, "corpus name or game JSON path")->required();
    sweep->add_option("--evals", eval_list, "evaluation descriptors (default: built-in grid)");
    sweep->add_option("--eps", eps, "value accuracy");
    sweep->add_option("--out", out_path, "output path (default stdout)");

    CLI::App* strat = app.add_subcommand("strategy", "discounted stage strategies and their exploitability");
    strat->add_option("--game", game_name, "corpus name or game JSON path")->required();
    strat->add_option("--eval", eval_desc, "evaluation descriptor")->required();
    strat->add_option("--eps", eps, "value accuracy");
    strat->add_option("--state", state_index, "start state index");
    strat->add_option("--out", out_path, "output path (default stdout)");

    CLI::App* cx = app.add_subcommand("counterexample", "long-game vs ladder-weighted values of the gambling chain");
    cx->add_option("--config", config_path, "config JSON with survival family and ladder shapes")->required();
    cx->add_option("--out", out_path, "output path (default stdout)");

    CLI::App* prop = app.add_subcommand("proptest", "randomized operator-law suite");
    prop->add_option("--seed", seed, "rng seed");
    prop->add_option("--budget", budget, "number of random trials");
    prop->add_option("--fault", fault_name, "none or inflate_apply");
    prop->add_option("--out", out_path, "output path (default stdout)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) {
            const wsg::GameSpec g = wsg::random_game(seed, gen_states, gen_rows, gen_cols);
            emit(out_path, wsg::dump_stable(wsg::to_json(g)));
        } else if (solve->parsed()) {
            const wsg::GameSpec g = wsg::load_game(game_name);
            const wsg::Evaluation theta = wsg::parse_evaluation(eval_desc);
            const auto op = wsg::ShapleyOperator::from_game(g);
            const wsg::ValueFunction v = wsg::v_theta(op, theta, eps);
            wsg::Json j;
            j["game"] = game_name;
            j["evaluation"] = wsg::to_json(theta);
            j["eps"] = eps;
            j["states"] = g.states;
            j["values"] = v.values;
            j["error_bound"] = v.error_bound;
            emit(out_path, wsg::dump_stable(j));
        } else if (sweep->parsed()) {
            const wsg::GameSpec g = wsg::load_game(game_name);
            const auto op = wsg::ShapleyOperator::from_game(g);
            std::vector<wsg::SweepEntry> entries;
            if (eval_list.empty()) {
                entries = default_sweep_grid();
            } else {
                for (const auto& d : eval_list) entries.push_back({d, wsg::parse_evaluation(d)});
            }
            emit(out_path, wsg::sweep_values_csv(op, entries, eps));
        } else if (strat->parsed()) {
            const wsg::GameSpec g = wsg::load_game(game_name);
            const wsg::Evaluation theta = wsg::parse_evaluation(eval_desc);
            const auto op = wsg::ShapleyOperator::from_game(g);
            if (state_index < 0 || state_index >= g.nK())
                throw std::invalid_argument("strategy: --state out of range");
            const std::int64_t horizon = theta.finite_support() ? theta.support_end() : theta.head_size();
            const wsg::StrategyPair pair = wsg::discounted_strategy_pair(op, theta, horizon, eps);
            const wsg::ValueFunction v = wsg::v_theta(op, theta, eps);
            const double v_star = v.values[static_cast<std::size_t>(state_index)];
            const wsg::PayoffResult pay = wsg::strategy_payoff(op, theta, pair.sigma, pair.tau, state_index);
            const wsg::Exploitability ex =
                wsg::exploitability(op, theta, pair.sigma, pair.tau, state_index, v_star);
            wsg::Json j;
            j["game"] = game_name;
            j["evaluation"] = wsg::to_json(theta);
            j["state"] = state_index;
            j["horizon"] = horizon;
            j["v_star"] = v_star;
            j["value_error_bound"] = v.error_bound;
            j["pair_payoff"] = pay.value;
            j["pair_payoff_error"] = pay.error_bound;
            j["sigma_gap"] = ex.sigma_gap;
            j["tau_gap"] = ex.tau_gap;
            if (pair.tail_lambda) j["tail_lambda"] = *pair.tail_lambda;
            emit(out_path, wsg::dump_stable(j));
        } else if (cx->parsed()) {
            const wsg::CounterexampleConfig cfg =
                wsg::counterexample_config_from_json(wsg::load_json_file(config_path));
            const wsg::CounterexampleReport rep = wsg::reproduce_counterexample(cfg.survival, cfg.ladders);
            emit(out_path, wsg::dump_stable(wsg::to_json(rep)));
        } else if (prop->parsed()) {
            wsg::FaultInjection fault;
            if (fault_name == "none") {
                fault = wsg::FaultInjection::none;
            } else if (fault_name == "inflate_apply") {
                fault = wsg::FaultInjection::inflate_apply;
            } else {
                throw std::invalid_argument("proptest: unknown fault '" + fault_name + "'");
            }
            const wsg::PropertyReport rep = wsg::run_property_suite(seed, budget, fault);
            emit(out_path, wsg::dump_stable(wsg::to_json(rep)));
            if (fault == wsg::FaultInjection::none && !rep.passed()) return 1;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
