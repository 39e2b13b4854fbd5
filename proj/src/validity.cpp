#include "rspmn/validity.hpp"

#include <cmath>
#include <map>
#include <sstream>

namespace rspmn {

namespace {

constexpr double kWeightTol = 1e-9;

void check_structure(const Network& net, const std::vector<bool>& live, ConditionResult& out) {
    const NodeId n = static_cast<NodeId>(net.nodes.size());
    for (NodeId id = 0; id < n; ++id) {
        if (!live[static_cast<std::size_t>(id)]) continue;
        const Node& node = net.at(id);
        bool ok = true;
        for (NodeId c : node.children)
            if (c < 0 || c >= n) ok = false;
        switch (node.type) {
            case NodeType::Sum: {
                if (node.weights.size() != node.children.size()) ok = false;
                double total = 0.0;
                for (double w : node.weights) {
                    if (w < 0.0) ok = false;
                    total += w;
                }
                if (!node.weights.empty() && std::fabs(total - 1.0) > kWeightTol) ok = false;
                break;
            }
            case NodeType::Max: {
                if (node.edge_labels.size() != node.children.size()) ok = false;
                std::vector<int> labels = node.edge_labels;
                std::sort(labels.begin(), labels.end());
                if (std::adjacent_find(labels.begin(), labels.end()) != labels.end()) ok = false;
                if (node.var < 0) ok = false;
                break;
            }
            case NodeType::CategoricalLeaf: {
                if (node.var < 0 || node.probs.empty()) ok = false;
                double total = 0.0;
                for (double p : node.probs) {
                    if (p < 0.0) ok = false;
                    total += p;
                }
                if (std::fabs(total - 1.0) > kWeightTol) ok = false;
                if (!node.children.empty()) ok = false;
                break;
            }
            case NodeType::UtilityLeaf:
            case NodeType::LatentInterface:
                if (!node.children.empty()) ok = false;
                break;
            case NodeType::Product:
                break;
        }
        if (!ok) out.fail(id);
    }
    try {
        topological_order(net);
    } catch (const std::exception&) {
        out.pass = false;
    }
}

void check_scope_conditions(const Network& net, const std::vector<bool>& live,
                            const std::vector<VarSet>& scope, ConditionResult& sum_complete,
                            ConditionResult& decomposable, ConditionResult& max_complete) {
    for (NodeId id = 0; id < static_cast<NodeId>(net.nodes.size()); ++id) {
        if (!live[static_cast<std::size_t>(id)]) continue;
        const Node& node = net.at(id);
        if (node.type == NodeType::Sum || node.type == NodeType::Max) {
            bool equal = true;
            for (std::size_t k = 1; k < node.children.size(); ++k)
                if (!(scope[static_cast<std::size_t>(node.children[k])] ==
                      scope[static_cast<std::size_t>(node.children[0])]))
                    equal = false;
            if (!equal) (node.type == NodeType::Sum ? sum_complete : max_complete).fail(id);
        } else if (node.type == NodeType::Product) {
            VarSet seen;
            bool disjoint = true;
            for (NodeId c : node.children) {
                const VarSet& cs = scope[static_cast<std::size_t>(c)];
                if (seen.intersects(cs)) disjoint = false;
                seen.union_with(cs);
            }
            if (!disjoint) decomposable.fail(id);
        }
    }
}

// Max-unique via reachability: two max nodes for the same decision variable lie
// on a common root-to-leaf path iff one reaches the other, so path enumeration
// is unnecessary.
void check_max_unique(const Network& net, const std::vector<bool>& live, ConditionResult& out) {
    std::map<VarId, std::vector<NodeId>> max_by_var;
    for (NodeId id = 0; id < static_cast<NodeId>(net.nodes.size()); ++id)
        if (live[static_cast<std::size_t>(id)] && net.at(id).type == NodeType::Max)
            max_by_var[net.at(id).var].push_back(id);
    for (const auto& [var, maxes] : max_by_var) {
        if (maxes.size() < 2) continue;
        for (NodeId from : maxes) {
            // DFS below `from`, flag any same-variable max strictly beneath it.
            std::vector<bool> seen(net.nodes.size(), false);
            std::vector<NodeId> stack(net.at(from).children.begin(), net.at(from).children.end());
            while (!stack.empty()) {
                NodeId id = stack.back();
                stack.pop_back();
                if (seen[static_cast<std::size_t>(id)]) continue;
                seen[static_cast<std::size_t>(id)] = true;
                const Node& node = net.at(id);
                if (node.type == NodeType::Max && node.var == var) out.fail(id);
                for (NodeId c : node.children) stack.push_back(c);
            }
        }
    }
}

}  // namespace

std::string ValidityReport::to_string() const {
    auto line = [](const char* name, const ConditionResult& c) {
        std::ostringstream os;
        os << "  " << name << ": " << (c.pass ? "pass" : "FAIL");
        if (!c.offenders.empty()) {
            os << " (nodes";
            for (std::size_t i = 0; i < c.offenders.size() && i < 8; ++i) os << " " << c.offenders[i];
            if (c.offenders.size() > 8) os << " ...";
            os << ")";
        }
        os << "\n";
        return os.str();
    };
    std::string s;
    s += line("structure_ok", structure_ok);
    s += line("sum_complete", sum_complete);
    s += line("decomposable", decomposable);
    s += line("max_complete", max_complete);
    s += line("max_unique", max_unique);
    s += line("template_sound", template_sound);
    s += line("top_valid", top_valid);
    return s;
}

ValidityReport check_spmn_valid(const Network& net) {
    ValidityReport report;
    if (net.roots.size() != 1) {
        report.structure_ok.pass = false;
        return report;
    }
    std::vector<bool> live;
    try {
        live = reachable_from_roots(net);
    } catch (const std::exception&) {
        report.structure_ok.pass = false;
        return report;
    }
    check_structure(net, live, report.structure_ok);
    if (!report.structure_ok.pass) return report;
    std::vector<VarSet> scope = scope_of(net);
    check_scope_conditions(net, live, scope, report.sum_complete, report.decomposable,
                           report.max_complete);
    check_max_unique(net, live, report.max_unique);
    return report;
}

ValidityReport check_template_sound(const TemplateNetwork& temp) {
    ValidityReport report;
    const Network& net = temp.network;
    if (net.roots.empty()) {
        report.structure_ok.pass = false;
        return report;
    }
    std::vector<bool> live;
    try {
        live = reachable_from_roots(net);
    } catch (const std::exception&) {
        report.structure_ok.pass = false;
        return report;
    }
    check_structure(net, live, report.structure_ok);
    if (!report.structure_ok.pass) return report;

    const int num_roots = static_cast<int>(net.roots.size());
    for (NodeId leaf : temp.latent_leaves) {
        const Node& node = net.at(leaf);
        if (node.type != NodeType::LatentInterface || node.interface_index < 0 ||
            node.interface_index >= num_roots)
            report.template_sound.fail(leaf);
    }
    if (!report.template_sound.pass) return report;

    // The latent scope-linking rule together with equal Ir scopes forces every
    // latent leaf onto one common scope, so Defs 2-5 are checked under the
    // quotient that merges the synthetic symbols.
    std::vector<VarSet> scope = scope_of(net, /*merge_latent=*/true);
    check_scope_conditions(net, live, scope, report.sum_complete, report.decomposable,
                           report.max_complete);
    check_max_unique(net, live, report.max_unique);

    for (std::size_t r = 1; r < net.roots.size(); ++r)
        if (!(scope[static_cast<std::size_t>(net.roots[r])] ==
              scope[static_cast<std::size_t>(net.roots[0])]))
            report.template_sound.fail(net.roots[r]);

    // No sum may hold two latent leaves mapping to the same interface root.
    for (NodeId id = 0; id < static_cast<NodeId>(net.nodes.size()); ++id) {
        if (!live[static_cast<std::size_t>(id)]) continue;
        const Node& node = net.at(id);
        if (node.type != NodeType::Sum) continue;
        std::vector<int> indices;
        for (NodeId c : node.children)
            if (net.at(c).type == NodeType::LatentInterface)
                indices.push_back(net.at(c).interface_index);
        std::sort(indices.begin(), indices.end());
        if (std::adjacent_find(indices.begin(), indices.end()) != indices.end())
            report.template_sound.fail(id);
    }
    return report;
}

ValidityReport check_top_valid(const TopNetwork& top) {
    ValidityReport report;
    const Network& net = top.network;
    if (net.roots.size() != 1) {
        report.structure_ok.pass = false;
        report.top_valid.pass = false;
        return report;
    }
    std::vector<bool> live;
    try {
        live = reachable_from_roots(net);
    } catch (const std::exception&) {
        report.structure_ok.pass = false;
        report.top_valid.pass = false;
        return report;
    }
    check_structure(net, live, report.structure_ok);
    if (!report.structure_ok.pass) {
        report.top_valid.pass = false;
        return report;
    }
    for (NodeId id = 0; id < static_cast<NodeId>(net.nodes.size()); ++id) {
        if (!live[static_cast<std::size_t>(id)]) continue;
        const NodeType t = net.at(id).type;
        if (t != NodeType::Sum && t != NodeType::Product && t != NodeType::LatentInterface)
            report.top_valid.fail(id);
    }
    std::vector<VarSet> scope = scope_of(net, /*merge_latent=*/true);
    check_scope_conditions(net, live, scope, report.sum_complete, report.decomposable,
                           report.max_complete);
    if (!report.sum_complete.pass || !report.decomposable.pass) report.top_valid.pass = false;
    return report;
}

Network unfold(const RspmnModel& model, int steps) {
    if (steps < 1) throw std::runtime_error("unfold: steps must be >= 1");
    const Network& tnet = model.temp.network;
    const int one_step_vars = static_cast<int>(model.variables.size());

    Network out;
    out.num_vars = one_step_vars * steps;

    // Copies are appended bottom-most first so every edge points at an
    // already-created node. copy_roots[t][i] = interface root i of copy t.
    //
    // Bottom-copy pruning must agree exactly with the alternative of feeding
    // latent leaves (1, 0): removed subtrees are exactly those worth the unit
    // value. A removed latent leaf marks its node "unit"; unit-ness propagates
    // through sums and products whose children are all units; products drop
    // unit children, while sums and max nodes keep them as explicit empty
    // products so mixture weights and decision branches stay untouched.
    std::vector<std::vector<NodeId>> copy_roots(static_cast<std::size_t>(steps));
    for (int t = steps - 1; t >= 0; --t) {
        const bool bottom = (t == steps - 1);
        const int var_offset = one_step_vars * t;
        std::vector<NodeId> remap(tnet.nodes.size(), -1);
        std::vector<bool> unit(tnet.nodes.size(), false);
        NodeId shared_unit = -1;
        auto unit_node = [&]() {
            if (shared_unit < 0) {
                Node empty;
                empty.type = NodeType::Product;
                shared_unit = out.add(std::move(empty));
            }
            return shared_unit;
        };
        for (NodeId id : topological_order(tnet)) {
            const Node& src = tnet.at(id);
            if (src.type == NodeType::LatentInterface) {
                if (bottom) {
                    unit[static_cast<std::size_t>(id)] = true;
                } else {
                    remap[static_cast<std::size_t>(id)] =
                        copy_roots[static_cast<std::size_t>(t + 1)]
                                  [static_cast<std::size_t>(src.interface_index)];
                }
                continue;
            }
            if (bottom && !src.is_leaf() && !src.children.empty()) {
                bool all_unit = true;
                for (NodeId c : src.children)
                    if (!unit[static_cast<std::size_t>(c)]) all_unit = false;
                if (all_unit && src.type != NodeType::Max) {
                    unit[static_cast<std::size_t>(id)] = true;
                    continue;
                }
            }
            Node copy = src;
            if (src.type == NodeType::Product) {
                copy.children.clear();
                for (NodeId c : src.children) {
                    if (unit[static_cast<std::size_t>(c)]) continue;
                    copy.children.push_back(remap[static_cast<std::size_t>(c)]);
                }
            } else {
                for (NodeId& c : copy.children)
                    c = unit[static_cast<std::size_t>(c)] ? unit_node() : remap[static_cast<std::size_t>(c)];
            }
            if (copy.var >= 0) copy.var += var_offset;
            remap[static_cast<std::size_t>(id)] = out.add(std::move(copy));
        }
        std::vector<NodeId>& roots = copy_roots[static_cast<std::size_t>(t)];
        roots.reserve(tnet.roots.size());
        for (NodeId r : tnet.roots) {
            if (unit[static_cast<std::size_t>(r)]) {
                // An interface root worth the unit value still needs a node.
                roots.push_back(unit_node());
                continue;
            }
            if (remap[static_cast<std::size_t>(r)] < 0)
                throw std::runtime_error("unfold: interface root missing after copy");
            roots.push_back(remap[static_cast<std::size_t>(r)]);
        }
    }

    // Top network capped on copy 0.
    const Network& topnet = model.top.network;
    std::vector<NodeId> remap(topnet.nodes.size(), -1);
    for (NodeId id : topological_order(topnet)) {
        const Node& src = topnet.at(id);
        if (src.type == NodeType::LatentInterface) {
            remap[static_cast<std::size_t>(id)] =
                copy_roots[0][static_cast<std::size_t>(src.interface_index)];
            continue;
        }
        Node copy = src;
        for (NodeId& c : copy.children) c = remap[static_cast<std::size_t>(c)];
        remap[static_cast<std::size_t>(id)] = out.add(std::move(copy));
    }
    out.roots = {remap[static_cast<std::size_t>(topnet.roots.at(0))]};
    return compact(out);
}

Theorem1Result verify_theorem1(const RspmnModel& model, int max_steps) {
    if (!check_template_sound(model.temp).all_pass())
        throw std::runtime_error("verify_theorem1: template is not sound");
    if (!check_top_valid(model.top).all_pass())
        throw std::runtime_error("verify_theorem1: top network is not valid");
    Theorem1Result result;
    result.pass_per_step.reserve(static_cast<std::size_t>(max_steps));
    for (int t = 1; t <= max_steps; ++t) {
        const bool ok = check_spmn_valid(unfold(model, t)).all_pass();
        result.pass_per_step.push_back(ok);
        result.all_pass = result.all_pass && ok;
    }
    return result;
}

}  // namespace rspmn
