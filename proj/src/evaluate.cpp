#include "rspmn/evaluate.hpp"

namespace rspmn {

namespace {

DualValue eval_node(const Node& node, const Evidence& evidence,
                    const LatentInputs& latent, EvalMode mode,
                    const std::vector<DualValue>& table) {
    switch (node.type) {
        case NodeType::CategoricalLeaf: {
            if (!evidence.observed(node.var)) return {1.0, 0.0};
            const double raw = evidence.get(node.var);
            const int v = static_cast<int>(raw);
            if (v < 0 || static_cast<std::size_t>(v) >= node.probs.size())
                throw std::runtime_error("evaluate: evidence value out of range for variable " +
                                         std::to_string(node.var));
            return make_dual(node.probs[static_cast<std::size_t>(v)], 0.0);
        }
        case NodeType::UtilityLeaf: {
            if (node.var >= 0 && evidence.observed(node.var)) {
                const bool match = std::fabs(evidence.get(node.var) - node.value) <= kUtilityMatchEps;
                return match ? DualValue{1.0, node.value} : DualValue{0.0, 0.0};
            }
            return {1.0, node.value};
        }
        case NodeType::LatentInterface: {
            const std::size_t i = static_cast<std::size_t>(node.interface_index);
            if (i < latent.values.size()) return latent.values[i];
            if (!latent.allow_default)
                throw std::runtime_error("evaluate: no latent input for interface index " +
                                         std::to_string(node.interface_index));
            return {1.0, 0.0};  // bottom-most template: interfaces read as 1, utility 0
        }
        case NodeType::Product: {
            double l = 1.0, eu = 0.0;
            for (NodeId c : node.children) {
                const DualValue& d = table[static_cast<std::size_t>(c)];
                l *= d.likelihood;
                eu += d.eu;
            }
            return make_dual(l, eu);
        }
        case NodeType::Sum: {
            double l = 0.0, weighted_eu = 0.0;
            for (std::size_t k = 0; k < node.children.size(); ++k) {
                const DualValue& d = table[static_cast<std::size_t>(node.children[k])];
                const double wl = node.weights[k] * d.likelihood;
                l += wl;
                weighted_eu += wl * d.eu;
            }
            if (l == 0.0) return {0.0, 0.0};
            return {l, weighted_eu / l};
        }
        case NodeType::Max: {
            const bool gated = evidence.observed(node.var);
            if (gated) {
                const int v = static_cast<int>(evidence.get(node.var));
                for (std::size_t k = 0; k < node.children.size(); ++k) {
                    if (node.edge_labels[k] == v)
                        return table[static_cast<std::size_t>(node.children[k])];
                }
                return {0.0, 0.0};  // decision value has no branch
            }
            if (mode == EvalMode::Meu) {
                // Argmax of conditional expected utility over possible branches;
                // zero-likelihood branches carry no conditional eu and are skipped.
                int best = -1;
                for (std::size_t k = 0; k < node.children.size(); ++k) {
                    const DualValue& d = table[static_cast<std::size_t>(node.children[k])];
                    if (d.likelihood <= 0.0) continue;
                    if (best < 0 || d.eu > table[static_cast<std::size_t>(node.children[static_cast<std::size_t>(best)])].eu)
                        best = static_cast<int>(k);
                }
                if (best < 0) return {0.0, 0.0};
                return table[static_cast<std::size_t>(node.children[static_cast<std::size_t>(best)])];
            }
            // Likelihood mode, decision unobserved: unweighted sum over branches.
            double l = 0.0, weighted_eu = 0.0;
            for (NodeId c : node.children) {
                const DualValue& d = table[static_cast<std::size_t>(c)];
                l += d.likelihood;
                weighted_eu += d.likelihood * d.eu;
            }
            if (l == 0.0) return {0.0, 0.0};
            return {l, weighted_eu / l};
        }
    }
    throw std::logic_error("evaluate: unknown node type");
}

}  // namespace

NetworkEvaluator::NetworkEvaluator(const Network& net)
    : net_(&net), order_(topological_order(net)) {}

EvalResult NetworkEvaluator::evaluate(const Evidence& evidence, const LatentInputs& latent,
                                      EvalMode mode, std::vector<DualValue>& table) const {
    table.assign(net_->nodes.size(), DualValue{});
    EvalResult result;
    for (NodeId id : order_) {
        table[static_cast<std::size_t>(id)] =
            eval_node(net_->at(id), evidence, latent, mode, table);
        ++result.nodes_visited;
    }
    result.root_values.reserve(net_->roots.size());
    for (NodeId r : net_->roots) result.root_values.push_back(table[static_cast<std::size_t>(r)]);
    return result;
}

EvalResult evaluate_bottom_up(const Network& net, const Evidence& evidence,
                              const LatentInputs& latent, EvalMode mode,
                              std::vector<DualValue>* node_table) {
    NetworkEvaluator ev(net);
    std::vector<DualValue> local;
    std::vector<DualValue>& table = node_table ? *node_table : local;
    return ev.evaluate(evidence, latent, mode, table);
}

}  // namespace rspmn
