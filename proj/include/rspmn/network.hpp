#pragma once

#include <optional>
#include <stdexcept>
#include <vector>

#include "rspmn/types.hpp"

namespace rspmn {

enum class NodeType {
    Sum,            // weighted mixture, weights normalized to 1
    Product,        // factorization; empty product acts as the unit (1, 0)
    Max,            // decision node, one labeled edge per decision value
    CategoricalLeaf,// distribution over one discrete state/decision variable
    UtilityLeaf,    // constant utility value bound to a utility variable
    LatentInterface // placeholder linked to an interface root of the next step
};

struct Node {
    NodeType type = NodeType::Product;
    std::vector<NodeId> children;
    std::vector<double> weights;     // Sum only, parallel to children
    std::vector<int> edge_labels;    // Max only, decision value per child
    VarId var = -1;                  // Max/CategoricalLeaf/UtilityLeaf
    std::vector<double> probs;       // CategoricalLeaf, size = cardinality
    double value = 0.0;              // UtilityLeaf
    int interface_index = -1;        // LatentInterface

    bool is_leaf() const {
        return type == NodeType::CategoricalLeaf || type == NodeType::UtilityLeaf ||
               type == NodeType::LatentInterface;
    }
};

// Rooted DAG of circuit nodes. `num_vars` is the size of the variable universe
// the leaves index into; evidence vectors are sized by it.
struct Network {
    std::vector<Node> nodes;
    std::vector<NodeId> roots;
    int num_vars = 0;

    NodeId add(Node n) {
        nodes.push_back(std::move(n));
        return static_cast<NodeId>(nodes.size() - 1);
    }

    const Node& at(NodeId id) const { return nodes.at(static_cast<std::size_t>(id)); }
    Node& at(NodeId id) { return nodes.at(static_cast<std::size_t>(id)); }
    std::size_t size() const { return nodes.size(); }
};

struct TemplateNetwork {
    Network network;                    // roots = interface roots, in Ir order
    std::vector<NodeId> latent_leaves;  // every LatentInterface node, any order
    // The bijection f is carried by each latent leaf's interface_index, which
    // names the interface root (position in network.roots) it maps to.
};

struct TopNetwork {
    Network network;  // single root; only Sum/Product/LatentInterface nodes
};

struct RspmnModel {
    std::vector<VariableMeta> variables;  // one-step variables
    PartialOrder partial_order;           // one-step slots
    TopNetwork top;
    TemplateNetwork temp;
    std::vector<int> unreferenced_interface_roots;  // kept in Ir but latent-orphaned
};

// Children-before-parents ordering. Throws on a cycle.
std::vector<NodeId> topological_order(const Network& net);

// Per-node scopes: a leaf's scope is its own variable, an internal node's is
// the union over children, and a max node additionally carries its decision
// variable. Latent interface leaves get the synthetic symbol
// num_vars + interface_index unless `merge_latent` collapses them all onto
// num_vars, which is the quotient used by the template soundness checks.
std::vector<VarSet> scope_of(const Network& net, bool merge_latent = false);

// Nodes reachable from the roots, useful after structural edits.
std::vector<bool> reachable_from_roots(const Network& net);

// Drops unreachable nodes and remaps ids; `remap` (old -> new or -1) is
// filled when provided.
Network compact(const Network& net, std::vector<NodeId>* remap = nullptr);

double sum_weight_total(const Node& n);

}  // namespace rspmn
