#include "rspmn/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "rspmn/serialize.hpp"
#include "rspmn/validity.hpp"

namespace rspmn {

using nlohmann::json;

std::vector<int> grid_model_policy(const RspmnModel& model, const GridSpec& spec,
                                   const MeuTable& meu) {
    VarId decision_var = -1;
    for (std::size_t v = 0; v < model.variables.size(); ++v)
        if (model.variables[v].kind == VarKind::Decision) decision_var = static_cast<VarId>(v);
    if (decision_var < 0) throw std::runtime_error("grid_model_policy: model has no decision variable");

    std::vector<int> policy(static_cast<std::size_t>(spec.width * spec.height), kNoop);
    for (int y = 0; y < spec.height; ++y) {
        for (int x = 0; x < spec.width; ++x) {
            const Cell c{x, y};
            if (spec.is_terminal(c)) continue;
            Evidence ev = make_state_evidence(model, {{"X", x}, {"Y", y}});
            const auto decisions = extract_policy(model, meu, ev);
            auto it = decisions.find(decision_var);
            if (it == decisions.end())
                throw std::runtime_error("grid_model_policy: no decision extracted at state");
            policy[static_cast<std::size_t>(spec.cell_index(c))] = it->second;
        }
    }
    return policy;
}

std::string strip_timing(const std::string& report_json) {
    json j = json::parse(report_json);
    j.erase("timing");
    return j.dump(2) + "\n";
}

BenchReport run_bench(const BenchOptions& options) {
    using Clock = std::chrono::steady_clock;
    const auto t_start = Clock::now();
    options.grid.validate();
    const int horizon = options.horizon > 0 ? options.horizon : options.grid.horizon;

    BenchReport out;
    json timing;

    // Simulate.
    auto t0 = Clock::now();
    SequenceDataset data = generate_dataset(options.grid, options.episodes, options.seed);
    timing["simulate_seconds"] = std::chrono::duration<double>(Clock::now() - t0).count();

    // Learn.
    LearnParams lp = options.learn;
    HardEmOptions em = options.em;
    em.threads = options.threads;
    LearnRspmnResult learned = learn_rspmn(data, lp, em);
    out.model = learned.model;
    timing["initial_template_seconds"] = learned.initial_seconds;
    timing["final_template_seconds"] = learned.refine_seconds;

    // Validate.
    const Theorem1Result theorem = verify_theorem1(out.model, options.theorem_horizons);
    out.theorem1_ok = theorem.all_pass;

    // Oracle.
    const Mdp mdp = grid_to_mdp(options.grid);
    const ValueIterationResult vi = value_iteration(mdp, horizon);
    out.optimal_meu = vi.values[static_cast<std::size_t>(mdp.start_state)];

    // MEU from the start state.
    t0 = Clock::now();
    Evidence start_ev = make_state_evidence(
        out.model, {{"X", options.grid.start.x}, {"Y", options.grid.start.y}});
    const MeuTable meu = evaluate_meu(out.model, horizon, &start_ev);
    timing["meu_eval_seconds"] = std::chrono::duration<double>(Clock::now() - t0).count();
    out.rspmn_meu = meu.meu;

    // Unfold-equivalence spot check at the bench horizon.
    const double unfolded = meu_via_unfold(out.model, horizon, &start_ev);
    const double denom = std::max(1.0, std::fabs(out.rspmn_meu));
    out.unfold_ok = std::fabs(unfolded - out.rspmn_meu) / denom <= 1e-9;

    // Policy comparison on reachable non-terminal states.
    const MeuTable meu_marginal = evaluate_meu(out.model, horizon);
    const std::vector<int> model_policy = grid_model_policy(out.model, options.grid, meu_marginal);
    std::vector<bool> mask = reachable_states(mdp);
    for (int s = 0; s < mdp.num_states; ++s)
        if (mdp.terminal[static_cast<std::size_t>(s)]) mask[static_cast<std::size_t>(s)] = false;
    out.delta_pct = policy_deviation(model_policy, vi.policy, &mask);

    // Rollout of the extracted policy.
    const double rollout = rollout_policy(
        options.grid,
        [&](Cell c) { return model_policy[static_cast<std::size_t>(options.grid.cell_index(c))]; },
        options.rollout_episodes, options.seed + 7777);
    out.rollout_reward = rollout;

    // Mean data log-likelihood.
    const LogLikelihoodResult ll = log_likelihood(out.model, data);
    out.mean_ll = ll.mean_ll;

    out.top_nodes = out.model.top.network.nodes.size();
    out.template_nodes = out.model.temp.network.nodes.size();
    out.two_step_nodes = learned.two_step.nodes.size();
    out.interface_roots = out.model.temp.network.roots.size();
    out.total_seconds = std::chrono::duration<double>(Clock::now() - t_start).count();
    timing["total_seconds"] = out.total_seconds;

    json config;
    config["grid"] = {{"width", options.grid.width},
                      {"height", options.grid.height},
                      {"start", {options.grid.start.x, options.grid.start.y}},
                      {"goal", {options.grid.goal.x, options.grid.goal.y}},
                      {"goal_reward", options.grid.goal_reward},
                      {"step_cost", options.grid.step_cost},
                      {"slip_prob", options.grid.slip_prob},
                      {"horizon", options.grid.horizon},
                      {"penalties_terminal", options.grid.penalties_terminal}};
    json pens = json::array();
    for (const auto& [cell, reward] : options.grid.penalties)
        pens.push_back({{"cell", {cell.x, cell.y}}, {"reward", reward}});
    config["grid"]["penalties"] = std::move(pens);
    config["episodes"] = options.episodes;
    config["horizon"] = horizon;
    config["seed"] = options.seed;
    config["threads"] = options.threads;
    config["rollout_episodes"] = options.rollout_episodes;
    config["theorem_horizons"] = options.theorem_horizons;
    config["learn"] = {{"indep_threshold", options.learn.indep_threshold},
                       {"cluster_k", options.learn.cluster_k},
                       {"laplace_alpha", options.learn.laplace_alpha},
                       {"min_rows", options.learn.effective_min_rows()},
                       {"seed", options.learn.seed},
                       {"kmodes_restarts", options.learn.kmodes_restarts},
                       {"max_utility_buckets", options.learn.max_utility_buckets}};
    config["em"] = {{"epochs", options.em.epochs},
                    {"early_stop_delta", options.em.early_stop_delta},
                    {"count_smoothing", options.em.count_smoothing}};

    json report;
    report["config"] = std::move(config);
    report["optimal_meu"] = format_double(out.optimal_meu);
    report["rspmn_meu"] = format_double(out.rspmn_meu);
    report["rollout_avg_reward"] = format_double(out.rollout_reward);
    report["policy_delta_pct"] = format_double(out.delta_pct);
    report["mean_ll"] = format_double(out.mean_ll);
    report["floored_records"] = ll.floored_records;
    report["wrapped_rows"] = learned.wrap_rows;
    report["network_sizes"] = {{"two_step_spmn", out.two_step_nodes},
                               {"top", out.top_nodes},
                               {"template", out.template_nodes},
                               {"interface_roots", out.interface_roots}};
    report["unfolded_valid_horizons_1_to_n"] = out.theorem1_ok;
    report["unfold_equivalence_pass"] = out.unfold_ok;
    json epochs = json::array();
    for (const HardEmEpochReport& e : learned.em.epochs)
        epochs.push_back({{"mean_ll", format_double(e.mean_ll)},
                          {"skipped_records", e.skipped_records},
                          {"template_nodes", e.template_nodes},
                          {"pruned_latent_edges", e.pruned_latent_edges},
                          {"max_weight_delta", format_double(e.max_weight_delta)},
                          {"template_sound", e.template_sound}});
    report["hard_em_epochs"] = std::move(epochs);
    report["timing"] = std::move(timing);
    out.report_json = report.dump(2) + "\n";

    std::ostringstream human;
    human << "bench results\n";
    human << "  MEU        optimal " << out.optimal_meu << "  rspmn " << out.rspmn_meu << "\n";
    human << "  avg reward rspmn policy " << out.rollout_reward << " (" << options.rollout_episodes
          << " rollouts)\n";
    human << "  delta%     " << out.delta_pct << " (reachable non-terminal states)\n";
    human << "  LL         " << out.mean_ll << "\n";
    human << "  sizes      two-step " << out.two_step_nodes << ", (top, template) = ("
          << out.top_nodes << ", " << out.template_nodes << "), interface roots "
          << out.interface_roots << "\n";
    human << "  checks     unfold validity[1.." << options.theorem_horizons << "] "
          << (out.theorem1_ok ? "pass" : "FAIL") << ", unfold equivalence "
          << (out.unfold_ok ? "pass" : "FAIL") << "\n";
    human << "  time       total " << out.total_seconds << "s (initial template "
          << learned.initial_seconds << "s, final template " << learned.refine_seconds << "s)\n";
    out.human = human.str();

    if (!options.out_dir.empty()) {
        std::filesystem::create_directories(options.out_dir);
        save_model(out.model, options.out_dir + "/model.json");
        std::ofstream rep(options.out_dir + "/report.json", std::ios::binary);
        rep << out.report_json;
    }
    return out;
}

}  // namespace rspmn
