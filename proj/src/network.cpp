#include "rspmn/network.hpp"

#include <numeric>

namespace rspmn {

std::vector<NodeId> topological_order(const Network& net) {
    const std::size_t n = net.nodes.size();
    // Kahn's algorithm emitting children before parents: a node becomes ready
    // once all of its children have been emitted.
    std::vector<int> remaining(n, 0);
    std::vector<std::vector<NodeId>> parents(n);
    for (NodeId id = 0; id < static_cast<NodeId>(n); ++id) {
        const Node& node = net.nodes[static_cast<std::size_t>(id)];
        remaining[static_cast<std::size_t>(id)] = static_cast<int>(node.children.size());
        for (NodeId c : node.children) {
            if (c < 0 || static_cast<std::size_t>(c) >= n)
                throw std::runtime_error("topological_order: child id out of range");
            parents[static_cast<std::size_t>(c)].push_back(id);
        }
    }
    std::vector<NodeId> order;
    order.reserve(n);
    std::vector<NodeId> stack;
    for (NodeId id = 0; id < static_cast<NodeId>(n); ++id)
        if (remaining[static_cast<std::size_t>(id)] == 0) stack.push_back(id);
    while (!stack.empty()) {
        NodeId id = stack.back();
        stack.pop_back();
        order.push_back(id);
        for (NodeId p : parents[static_cast<std::size_t>(id)]) {
            if (--remaining[static_cast<std::size_t>(p)] == 0) stack.push_back(p);
        }
    }
    if (order.size() != n) throw std::runtime_error("topological_order: cycle detected");
    return order;
}

std::vector<VarSet> scope_of(const Network& net, bool merge_latent) {
    std::vector<NodeId> order = topological_order(net);
    std::vector<VarSet> scope(net.nodes.size());
    for (NodeId id : order) {
        const Node& node = net.at(id);
        VarSet& s = scope[static_cast<std::size_t>(id)];
        switch (node.type) {
            case NodeType::CategoricalLeaf:
            case NodeType::UtilityLeaf:
                if (node.var >= 0) s.insert(node.var);
                break;
            case NodeType::LatentInterface:
                s.insert(net.num_vars + (merge_latent ? 0 : node.interface_index));
                break;
            case NodeType::Max:
                // A max node stands for its decision variable.
                s.insert(node.var);
                for (NodeId c : node.children) s.union_with(scope[static_cast<std::size_t>(c)]);
                break;
            default:
                for (NodeId c : node.children) s.union_with(scope[static_cast<std::size_t>(c)]);
                break;
        }
    }
    return scope;
}

std::vector<bool> reachable_from_roots(const Network& net) {
    std::vector<bool> seen(net.nodes.size(), false);
    std::vector<NodeId> stack(net.roots.begin(), net.roots.end());
    while (!stack.empty()) {
        NodeId id = stack.back();
        stack.pop_back();
        if (id < 0 || static_cast<std::size_t>(id) >= net.nodes.size())
            throw std::runtime_error("reachable_from_roots: node id out of range");
        if (seen[static_cast<std::size_t>(id)]) continue;
        seen[static_cast<std::size_t>(id)] = true;
        for (NodeId c : net.at(id).children) stack.push_back(c);
    }
    return seen;
}

Network compact(const Network& net, std::vector<NodeId>* remap_out) {
    std::vector<bool> keep = reachable_from_roots(net);
    std::vector<NodeId> remap(net.nodes.size(), -1);
    Network out;
    out.num_vars = net.num_vars;
    for (NodeId id = 0; id < static_cast<NodeId>(net.nodes.size()); ++id) {
        if (!keep[static_cast<std::size_t>(id)]) continue;
        remap[static_cast<std::size_t>(id)] = static_cast<NodeId>(out.nodes.size());
        out.nodes.push_back(net.at(id));
    }
    for (Node& node : out.nodes)
        for (NodeId& c : node.children) c = remap[static_cast<std::size_t>(c)];
    out.roots.reserve(net.roots.size());
    for (NodeId r : net.roots) out.roots.push_back(remap[static_cast<std::size_t>(r)]);
    if (remap_out) *remap_out = std::move(remap);
    return out;
}

double sum_weight_total(const Node& n) {
    return std::accumulate(n.weights.begin(), n.weights.end(), 0.0);
}

}  // namespace rspmn
