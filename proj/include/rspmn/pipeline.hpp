#pragma once

#include <string>

#include "rspmn/builder.hpp"
#include "rspmn/envs.hpp"
#include "rspmn/evaluator.hpp"

namespace rspmn {

struct BenchOptions {
    GridSpec grid;
    int episodes = 10000;
    int horizon = 0;  // 0 = grid horizon
    std::uint64_t seed = 1;
    int threads = 1;
    LearnParams learn;
    HardEmOptions em;
    int rollout_episodes = 2000;
    int theorem_horizons = 5;
    std::string out_dir;  // when set, model/report/dataset land here
};

struct BenchReport {
    double optimal_meu = 0.0;       // value iteration from the start state
    double rspmn_meu = 0.0;
    double rollout_reward = 0.0;    // average reward of the extracted policy
    double delta_pct = 0.0;         // policy deviation on reachable non-terminal states
    double mean_ll = 0.0;
    std::size_t top_nodes = 0;
    std::size_t template_nodes = 0;
    std::size_t two_step_nodes = 0;
    std::size_t interface_roots = 0;
    bool theorem1_ok = false;
    bool unfold_ok = false;         // evaluate_meu vs meu_via_unfold at the bench horizon
    double total_seconds = 0.0;

    std::string report_json;        // full structured report including config echo
    std::string human;              // printable table
    RspmnModel model;
};

BenchReport run_bench(const BenchOptions& options);

// Report JSON with the timing object removed, for run-to-run comparison.
std::string strip_timing(const std::string& report_json);

// Per-state grid policy from the model: extract_policy at every non-terminal
// state, kNoop elsewhere. The grid's single decision variable is assumed.
std::vector<int> grid_model_policy(const RspmnModel& model, const GridSpec& spec,
                                   const MeuTable& meu);

}  // namespace rspmn
