#include "rspmn/evaluator.hpp"

#include <cmath>

#include "rspmn/validity.hpp"

namespace rspmn {

MeuTable evaluate_meu(const RspmnModel& model, int horizon, const Evidence* evidence) {
    if (horizon < 1) throw std::runtime_error("evaluate_meu: horizon must be >= 1");
    if (evidence && evidence->size() != static_cast<int>(model.variables.size()))
        throw std::runtime_error("evaluate_meu: evidence sized for a different variable set");

    const NetworkEvaluator template_eval(model.temp.network);
    const NetworkEvaluator top_eval(model.top.network);
    const Evidence none(static_cast<int>(model.variables.size()));

    MeuTable table;
    table.horizon = horizon;
    LatentInputs latent;  // pass 0 reads (1, 0) defaults
    std::vector<DualValue> scratch;
    for (int k = 1; k <= horizon; ++k) {
        const bool final_pass = (k == horizon);
        const Evidence& ev = (final_pass && evidence) ? *evidence : none;
        EvalResult r = template_eval.evaluate(ev, latent, EvalMode::Meu, scratch);
        table.iterations.push_back(r.root_values);
        latent.values = std::move(r.root_values);
    }
    EvalResult top = top_eval.evaluate(none, latent, EvalMode::Meu, scratch);
    table.meu = top.root_values[0].eu;
    return table;
}

std::map<VarId, int> extract_policy(const RspmnModel& model, const MeuTable& meu,
                                    const Evidence& state) {
    if (meu.horizon < 1 || meu.iterations.empty())
        throw std::runtime_error("extract_policy: MEU table not computed");

    // Redo the step-0 pass under this state with the remaining-horizon values
    // on the latent leaves.
    LatentInputs latent;
    if (meu.horizon >= 2) latent.values = meu.iterations[static_cast<std::size_t>(meu.horizon - 2)];
    const NetworkEvaluator template_eval(model.temp.network);
    const NetworkEvaluator top_eval(model.top.network);
    std::vector<DualValue> table;
    template_eval.evaluate(state, latent, EvalMode::Meu, table);

    LatentInputs top_latent;
    top_latent.values.reserve(model.temp.network.roots.size());
    for (NodeId r : model.temp.network.roots)
        top_latent.values.push_back(table[static_cast<std::size_t>(r)]);
    std::vector<DualValue> top_table;
    const Evidence none(static_cast<int>(model.variables.size()));
    EvalResult top = top_eval.evaluate(none, top_latent, EvalMode::Meu, top_table);
    if (top.root_values[0].likelihood <= 0.0)
        throw std::runtime_error("extract_policy: state has no support in the model");

    std::map<VarId, int> decisions;
    const Network& tnet = model.temp.network;

    // Walk the top network to the entry interface root, then the template.
    std::vector<NodeId> entry;
    {
        std::vector<NodeId> stack{model.top.network.roots[0]};
        while (!stack.empty()) {
            const NodeId id = stack.back();
            stack.pop_back();
            const Node& node = model.top.network.at(id);
            if (node.type == NodeType::LatentInterface) {
                entry.push_back(tnet.roots.at(static_cast<std::size_t>(node.interface_index)));
            } else if (node.type == NodeType::Sum) {
                int best = -1;
                double best_mass = -1.0;
                for (std::size_t k = 0; k < node.children.size(); ++k) {
                    const double mass = node.weights[k] *
                                        top_table[static_cast<std::size_t>(node.children[k])].likelihood;
                    if (mass > best_mass) {
                        best_mass = mass;
                        best = static_cast<int>(k);
                    }
                }
                if (best >= 0) stack.push_back(node.children[static_cast<std::size_t>(best)]);
            } else {
                for (NodeId c : node.children) stack.push_back(c);
            }
        }
    }

    std::vector<NodeId> stack = entry;
    while (!stack.empty()) {
        const NodeId id = stack.back();
        stack.pop_back();
        const Node& node = tnet.at(id);
        switch (node.type) {
            case NodeType::Sum: {
                bool latent_sum = !node.children.empty();
                for (NodeId c : node.children)
                    if (tnet.at(c).type != NodeType::LatentInterface) latent_sum = false;
                if (latent_sum) break;  // next step, outside this policy query
                int best = -1;
                double best_mass = -1.0;
                for (std::size_t k = 0; k < node.children.size(); ++k) {
                    const double mass =
                        node.weights[k] * table[static_cast<std::size_t>(node.children[k])].likelihood;
                    if (mass > best_mass) {
                        best_mass = mass;
                        best = static_cast<int>(k);
                    }
                }
                if (best >= 0) stack.push_back(node.children[static_cast<std::size_t>(best)]);
                break;
            }
            case NodeType::Max: {
                if (state.observed(node.var)) {
                    const int v = static_cast<int>(state.get(node.var));
                    for (std::size_t k = 0; k < node.children.size(); ++k)
                        if (node.edge_labels[k] == v) {
                            decisions[node.var] = v;
                            stack.push_back(node.children[k]);
                            break;
                        }
                    break;
                }
                int best = -1;
                double best_eu = 0.0;
                for (std::size_t k = 0; k < node.children.size(); ++k) {
                    const DualValue& d = table[static_cast<std::size_t>(node.children[k])];
                    if (d.likelihood <= 0.0) continue;
                    if (best < 0 || d.eu > best_eu) {
                        best = static_cast<int>(k);
                        best_eu = d.eu;
                    }
                }
                if (best >= 0) {
                    decisions[node.var] = node.edge_labels[static_cast<std::size_t>(best)];
                    stack.push_back(node.children[static_cast<std::size_t>(best)]);
                }
                break;
            }
            case NodeType::Product:
                for (NodeId c : node.children) stack.push_back(c);
                break;
            default:
                break;
        }
    }
    return decisions;
}

LogLikelihoodResult log_likelihood(const RspmnModel& model, const SequenceDataset& data) {
    const NetworkEvaluator template_eval(model.temp.network);
    const NetworkEvaluator top_eval(model.top.network);
    const VarId uvar = data.utility_var();
    const double floor_ll = std::log(std::numeric_limits<double>::min());

    LogLikelihoodResult result;
    std::vector<DualValue> table;
    std::vector<DualValue> top_table;
    double total = 0.0;
    for (const Episode& episode : data.episodes) {
        if (episode.empty()) continue;
        ++result.records;
        const std::size_t len = episode.size();
        double log_scale = 0.0;
        LatentInputs latent;
        bool dead = false;
        std::vector<DualValue> roots;
        for (std::size_t t = len; t-- > 0;) {
            Evidence ev(static_cast<int>(model.variables.size()));
            int idx = 0;
            for (std::size_t v = 0; v < model.variables.size(); ++v) {
                if (static_cast<VarId>(v) == uvar) continue;  // utilities carry no likelihood
                ev.set(static_cast<VarId>(v), episode[t].values.at(static_cast<std::size_t>(idx)));
                ++idx;
            }
            latent.allow_default = true;
            if (t + 1 < len) latent.values = std::move(roots);
            else latent.values.clear();
            EvalResult r = template_eval.evaluate(ev, latent, EvalMode::Likelihood, table);
            double peak = 0.0;
            for (const DualValue& d : r.root_values) peak = std::max(peak, d.likelihood);
            if (peak <= 0.0) {
                dead = true;
                break;
            }
            log_scale += std::log(peak);
            for (DualValue& d : r.root_values) d.likelihood /= peak;
            roots = std::move(r.root_values);
        }
        double ll = floor_ll;
        if (!dead) {
            LatentInputs top_latent;
            top_latent.values = std::move(roots);
            const Evidence none(static_cast<int>(model.variables.size()));
            EvalResult r = top_eval.evaluate(none, top_latent, EvalMode::Likelihood, top_table);
            if (r.root_values[0].likelihood > 0.0)
                ll = std::log(r.root_values[0].likelihood) + log_scale;
            else
                dead = true;
        }
        if (dead) ++result.floored_records;
        total += ll;
    }
    result.mean_ll = result.records ? total / static_cast<double>(result.records) : 0.0;
    return result;
}

double meu_via_unfold(const RspmnModel& model, int horizon, const Evidence* evidence) {
    if (horizon < 1) throw std::runtime_error("meu_via_unfold: horizon must be >= 1");
    const std::size_t estimate = model.top.network.nodes.size() +
                                 static_cast<std::size_t>(horizon) * model.temp.network.nodes.size();
    if (estimate > kUnfoldNodeGuard)
        throw std::runtime_error("meu_via_unfold: would materialize " + std::to_string(estimate) +
                                 " nodes, over the guard of " + std::to_string(kUnfoldNodeGuard));
    const Network net = unfold(model, horizon);
    Evidence full(net.num_vars);
    if (evidence) {
        for (VarId v = 0; v < evidence->size(); ++v)
            if (evidence->observed(v)) full.set(v, evidence->get(v));  // step-0 ids coincide
    }
    EvalResult r = evaluate_bottom_up(net, full, LatentInputs{}, EvalMode::Meu);
    return r.root_values[0].eu;
}

Evidence make_state_evidence(const RspmnModel& model,
                             const std::map<std::string, int>& assignment) {
    Evidence ev(static_cast<int>(model.variables.size()));
    for (const auto& [name, value] : assignment) {
        bool found = false;
        for (std::size_t v = 0; v < model.variables.size(); ++v) {
            if (model.variables[v].name == name) {
                ev.set(static_cast<VarId>(v), value);
                found = true;
                break;
            }
        }
        if (!found) throw std::runtime_error("unknown variable: " + name);
    }
    return ev;
}

}  // namespace rspmn
