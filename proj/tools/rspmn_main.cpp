#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "rspmn/pipeline.hpp"
#include "rspmn/serialize.hpp"
#include "rspmn/validity.hpp"

namespace {

using namespace rspmn;
using nlohmann::json;

GridSpec resolve_grid(const std::string& arg) {
    if (arg == "paper2x2") return paper_grid_2x2();
    return load_grid_spec(arg);
}

std::map<std::string, int> parse_state(const std::string& arg) {
    std::map<std::string, int> assignment;
    std::istringstream in(arg);
    std::string part;
    while (std::getline(in, part, ',')) {
        const auto eq = part.find('=');
        if (eq == std::string::npos) throw std::runtime_error("bad --state entry: " + part);
        assignment[part.substr(0, eq)] = std::stoi(part.substr(eq + 1));
    }
    return assignment;
}

struct GlobalArgs {
    std::uint64_t seed = 1;
    int threads = 1;
    std::string out_dir;
};

int cmd_simulate(const std::string& grid_arg, int episodes, const GlobalArgs& g,
                 const std::string& out_csv, const std::string& out_order) {
    const GridSpec spec = resolve_grid(grid_arg);
    SequenceDataset data = generate_dataset(spec, episodes, g.seed);
    save_dataset_csv(data, out_csv);
    if (!out_order.empty()) save_order_file(data, out_order);
    json j;
    j["episodes"] = episodes;
    j["seed"] = g.seed;
    j["csv"] = out_csv;
    std::cout << j.dump(2) << "\n";
    return 0;
}

int cmd_learn(const std::string& csv, const std::string& order, LearnParams lp, HardEmOptions em,
              const GlobalArgs& g, const std::string& out_model, const std::string& out_report) {
    em.threads = g.threads;
    SequenceDataset data = load_dataset(csv, order);
    LearnRspmnResult learned = learn_rspmn(data, lp, em);
    save_model(learned.model, out_model);
    json report;
    report["config"] = {{"data", csv},
                        {"order", order},
                        {"indep_threshold", lp.indep_threshold},
                        {"cluster_k", lp.cluster_k},
                        {"laplace_alpha", lp.laplace_alpha},
                        {"min_rows", lp.effective_min_rows()},
                        {"seed", lp.seed},
                        {"epochs", em.epochs},
                        {"threads", g.threads}};
    report["wrapped_rows"] = learned.wrap_rows;
    report["two_step_nodes"] = learned.two_step.nodes.size();
    report["top_nodes"] = learned.model.top.network.nodes.size();
    report["template_nodes"] = learned.model.temp.network.nodes.size();
    report["interface_roots"] = learned.model.temp.network.roots.size();
    report["initial_template_seconds"] = learned.initial_seconds;
    report["final_template_seconds"] = learned.refine_seconds;
    json epochs = json::array();
    for (const HardEmEpochReport& e : learned.em.epochs)
        epochs.push_back({{"mean_ll", e.mean_ll},
                          {"skipped_records", e.skipped_records},
                          {"template_nodes", e.template_nodes},
                          {"pruned_latent_edges", e.pruned_latent_edges},
                          {"max_weight_delta", e.max_weight_delta},
                          {"template_sound", e.template_sound}});
    report["hard_em_epochs"] = std::move(epochs);
    if (!out_report.empty()) {
        std::ofstream out(out_report, std::ios::binary);
        out << report.dump(2) << "\n";
    }
    std::cout << report.dump(2) << "\n";
    return 0;
}

int cmd_validate(const std::string& model_path, int horizons) {
    const RspmnModel model = load_model(model_path);
    const ValidityReport temp_report = check_template_sound(model.temp);
    const ValidityReport top_report = check_top_valid(model.top);
    bool all = temp_report.all_pass() && top_report.all_pass();
    json j;
    j["template_sound"] = temp_report.all_pass();
    j["top_valid"] = top_report.all_pass();
    if (all && horizons > 0) {
        const Theorem1Result theorem = verify_theorem1(model, horizons);
        json per_step = json::array();
        for (bool ok : theorem.pass_per_step) per_step.push_back(ok);
        j["unfolded_valid_per_horizon"] = std::move(per_step);
        all = all && theorem.all_pass;
    }
    j["all_pass"] = all;
    std::cout << j.dump(2) << "\n";
    std::cout << "template:\n" << temp_report.to_string();
    std::cout << "top:\n" << top_report.to_string();
    return all ? 0 : 2;
}

int cmd_eval_meu(const std::string& model_path, int horizon, const std::string& state_arg) {
    const RspmnModel model = load_model(model_path);
    Evidence ev;
    const Evidence* evp = nullptr;
    if (!state_arg.empty()) {
        ev = make_state_evidence(model, parse_state(state_arg));
        evp = &ev;
    }
    const MeuTable meu = evaluate_meu(model, horizon, evp);
    json j;
    j["horizon"] = horizon;
    j["meu"] = format_double(meu.meu);
    json iters = json::array();
    for (const auto& iteration : meu.iterations) {
        json roots = json::array();
        for (const DualValue& d : iteration)
            roots.push_back({{"likelihood", format_double(d.likelihood)}, {"eu", format_double(d.eu)}});
        iters.push_back(std::move(roots));
    }
    j["iterations"] = std::move(iters);
    std::cout << j.dump(2) << "\n";
    return 0;
}

int cmd_eval_ll(const std::string& model_path, const std::string& csv, const std::string& order) {
    const RspmnModel model = load_model(model_path);
    const SequenceDataset data = load_dataset(csv, order);
    const LogLikelihoodResult ll = log_likelihood(model, data);
    json j;
    j["mean_ll"] = format_double(ll.mean_ll);
    j["records"] = ll.records;
    j["floored_records"] = ll.floored_records;
    std::cout << j.dump(2) << "\n";
    return 0;
}

int cmd_policy(const std::string& model_path, int horizon, const std::string& state_arg) {
    const RspmnModel model = load_model(model_path);
    const Evidence ev = make_state_evidence(model, parse_state(state_arg));
    const MeuTable meu = evaluate_meu(model, horizon);
    const auto decisions = extract_policy(model, meu, ev);
    json j;
    j["horizon"] = horizon;
    json actions;
    for (const auto& [var, value] : decisions)
        actions[model.variables.at(static_cast<std::size_t>(var)).name] = value;
    j["decisions"] = std::move(actions);
    std::cout << j.dump(2) << "\n";
    return 0;
}

int cmd_rollout(const std::string& grid_arg, const std::string& model_path, int horizon,
                int episodes, const GlobalArgs& g) {
    const GridSpec spec = resolve_grid(grid_arg);
    const RspmnModel model = load_model(model_path);
    const int h = horizon > 0 ? horizon : spec.horizon;
    const MeuTable meu = evaluate_meu(model, h);
    const std::vector<int> policy = grid_model_policy(model, spec, meu);
    const double reward = rollout_policy(
        spec, [&](Cell c) { return policy[static_cast<std::size_t>(spec.cell_index(c))]; }, episodes,
        g.seed);
    json j;
    j["episodes"] = episodes;
    j["horizon"] = h;
    j["mean_reward"] = format_double(reward);
    std::cout << j.dump(2) << "\n";
    return 0;
}

int cmd_oracle(const std::string& grid_arg, int horizon) {
    const GridSpec spec = resolve_grid(grid_arg);
    const Mdp mdp = grid_to_mdp(spec);
    const int h = horizon > 0 ? horizon : spec.horizon;
    const ValueIterationResult vi = value_iteration(mdp, h);
    json j;
    j["horizon"] = h;
    j["start_value"] = format_double(vi.values[static_cast<std::size_t>(mdp.start_state)]);
    json states = json::array();
    for (int s = 0; s < mdp.num_states; ++s) {
        const Cell c = spec.cell_at(s);
        states.push_back({{"x", c.x},
                          {"y", c.y},
                          {"value", format_double(vi.values[static_cast<std::size_t>(s)])},
                          {"action", grid_action_name(vi.policy[static_cast<std::size_t>(s)])},
                          {"terminal", mdp.terminal[static_cast<std::size_t>(s)]}});
    }
    j["states"] = std::move(states);
    std::cout << j.dump(2) << "\n";
    return 0;
}

int cmd_check_unfold(const std::string& model_path, int horizon) {
    const RspmnModel model = load_model(model_path);
    const MeuTable meu = evaluate_meu(model, horizon);
    const double unfolded = meu_via_unfold(model, horizon);
    const double denom = std::max(1.0, std::fabs(meu.meu));
    const double rel = std::fabs(unfolded - meu.meu) / denom;
    json j;
    j["horizon"] = horizon;
    j["iterated_meu"] = format_double(meu.meu);
    j["unfolded_meu"] = format_double(unfolded);
    j["relative_error"] = format_double(rel);
    j["pass"] = rel <= 1e-9;
    std::cout << j.dump(2) << "\n";
    return rel <= 1e-9 ? 0 : 2;
}

int cmd_bench(const std::string& grid_arg, int episodes, int horizon, int rollout_episodes,
              const GlobalArgs& g, const LearnParams& lp, const HardEmOptions& em) {
    BenchOptions options;
    options.grid = resolve_grid(grid_arg);
    options.episodes = episodes;
    options.horizon = horizon;
    options.seed = g.seed;
    options.threads = g.threads;
    options.learn = lp;
    options.em = em;
    options.rollout_episodes = rollout_episodes;
    options.out_dir = g.out_dir;
    const BenchReport report = run_bench(options);
    std::cout << report.human;
    if (g.out_dir.empty()) std::cout << report.report_json;
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"recurrent sum-product-max networks: learn, validate, evaluate"};
    app.require_subcommand(1);

    GlobalArgs g;
    app.add_option("--seed", g.seed, "base random seed")->capture_default_str();
    app.add_option("--threads", g.threads, "worker threads for hard EM")->capture_default_str();
    app.add_option("--out-dir", g.out_dir, "directory for generated artifacts");

    LearnParams lp;
    HardEmOptions em;

    std::string grid_arg = "paper2x2";
    std::string model_path, csv_path, order_path, state_arg, out_csv = "data.csv", out_order,
                out_model = "model.json", out_report;
    int episodes = 10000, horizon = 0, horizons = 5, rollout_episodes = 2000;

    auto* simulate = app.add_subcommand("simulate", "generate a random-policy dataset");
    simulate->add_option("--grid", grid_arg, "grid spec JSON path or 'paper2x2'");
    simulate->add_option("--episodes", episodes)->capture_default_str();
    simulate->add_option("--out", out_csv, "output CSV")->capture_default_str();
    simulate->add_option("--order-out", out_order, "also write the partial-order JSON");

    auto* learn = app.add_subcommand("learn", "learn an RSPMN from episodic data");
    learn->add_option("--data", csv_path, "dataset CSV")->required();
    learn->add_option("--order", order_path, "partial-order JSON")->required();
    learn->add_option("--out", out_model, "output model path")->capture_default_str();
    learn->add_option("--report", out_report, "training report path");
    learn->add_option("--epochs", em.epochs)->capture_default_str();
    learn->add_option("--indep-threshold", lp.indep_threshold)->capture_default_str();
    learn->add_option("--cluster-k", lp.cluster_k)->capture_default_str();
    learn->add_option("--laplace-alpha", lp.laplace_alpha)->capture_default_str();
    learn->add_option("--min-rows", lp.min_rows, "minimum rows to attempt clustering");
    learn->add_option("--count-smoothing", em.count_smoothing)->capture_default_str();

    auto* validate = app.add_subcommand("validate", "check template soundness and Theorem 1");
    validate->add_option("--model", model_path)->required();
    validate->add_option("--horizons", horizons, "unfold horizons to verify")->capture_default_str();

    auto* eval_meu = app.add_subcommand("eval-meu", "maximum expected utility");
    eval_meu->add_option("--model", model_path)->required();
    eval_meu->add_option("--horizon", horizon)->required();
    eval_meu->add_option("--state", state_arg, "evidence, e.g. X=0,Y=0");

    auto* eval_ll = app.add_subcommand("eval-ll", "mean data log-likelihood");
    eval_ll->add_option("--model", model_path)->required();
    eval_ll->add_option("--data", csv_path)->required();
    eval_ll->add_option("--order", order_path)->required();

    auto* policy = app.add_subcommand("policy", "greedy decisions at a state");
    policy->add_option("--model", model_path)->required();
    policy->add_option("--horizon", horizon)->required();
    policy->add_option("--state", state_arg)->required();

    auto* rollout = app.add_subcommand("rollout", "simulate the extracted policy");
    rollout->add_option("--grid", grid_arg)->required();
    rollout->add_option("--model", model_path)->required();
    rollout->add_option("--horizon", horizon)->capture_default_str();
    rollout->add_option("--episodes", episodes)->capture_default_str();

    auto* oracle = app.add_subcommand("oracle", "finite-horizon value iteration on the grid");
    oracle->add_option("--grid", grid_arg)->required();
    oracle->add_option("--horizon", horizon)->capture_default_str();

    auto* check_unfold = app.add_subcommand("check-unfold", "iterated vs unfolded MEU");
    check_unfold->add_option("--model", model_path)->required();
    check_unfold->add_option("--horizon", horizon)->required();

    auto* bench = app.add_subcommand("bench", "full pipeline with oracle comparison");
    bench->add_option("--grid", grid_arg)->capture_default_str();
    bench->add_option("--episodes", episodes)->capture_default_str();
    bench->add_option("--horizon", horizon, "MEU horizon (default: grid horizon)");
    bench->add_option("--rollout-episodes", rollout_episodes)->capture_default_str();
    bench->add_option("--epochs", em.epochs)->capture_default_str();
    bench->add_option("--indep-threshold", lp.indep_threshold)->capture_default_str();
    bench->add_option("--cluster-k", lp.cluster_k)->capture_default_str();
    bench->add_option("--laplace-alpha", lp.laplace_alpha)->capture_default_str();
    bench->add_option("--min-rows", lp.min_rows);

    for (CLI::App* sub :
         {simulate, learn, validate, eval_meu, eval_ll, policy, rollout, oracle, check_unfold, bench})
        sub->fallthrough();

    CLI11_PARSE(app, argc, argv);

    try {
        lp.seed = g.seed;
        if (simulate->parsed()) return cmd_simulate(grid_arg, episodes, g, out_csv, out_order);
        if (learn->parsed()) return cmd_learn(csv_path, order_path, lp, em, g, out_model, out_report);
        if (validate->parsed()) return cmd_validate(model_path, horizons);
        if (eval_meu->parsed()) return cmd_eval_meu(model_path, horizon, state_arg);
        if (eval_ll->parsed()) return cmd_eval_ll(model_path, csv_path, order_path);
        if (policy->parsed()) return cmd_policy(model_path, horizon, state_arg);
        if (rollout->parsed()) return cmd_rollout(grid_arg, model_path, horizon, episodes, g);
        if (oracle->parsed()) return cmd_oracle(grid_arg, horizon);
        if (check_unfold->parsed()) return cmd_check_unfold(model_path, horizon);
        if (bench->parsed()) return cmd_bench(grid_arg, episodes, horizon, rollout_episodes, g, lp, em);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
