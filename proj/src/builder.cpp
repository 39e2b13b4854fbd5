#include "rspmn/builder.hpp"

#include <chrono>
#include <cmath>
#include <numeric>
#include <set>
#include <thread>

#include "rspmn/evaluate.hpp"
#include "rspmn/validity.hpp"

namespace rspmn {

namespace {

VarSet step1_var_set(const Network& s2) {
    std::vector<VarId> ids;
    for (VarId v = s2.num_vars / 2; v < s2.num_vars; ++v) ids.push_back(v);
    return VarSet(std::move(ids));
}

}  // namespace

Network extract_one_step(const Network& s2) {
    if (s2.roots.size() != 1) throw std::runtime_error("extract_one_step: expected a single root");
    const VarSet next_step = step1_var_set(s2);
    std::vector<VarSet> scope = scope_of(s2);
    if (scope[static_cast<std::size_t>(s2.roots[0])].is_subset_of(next_step))
        throw std::runtime_error("extract_one_step: root models only the next step");

    // Only product nodes shed next-step children. A sum whose subtree models
    // only the next step disappears here through its product parent (its own
    // scope is next-step-only); max branches are never dropped, they merely
    // empty out into unit products. Sum completeness makes partial sum-child
    // removal impossible.
    Network out = s2;
    for (NodeId id = 0; id < static_cast<NodeId>(out.nodes.size()); ++id) {
        Node& node = out.at(id);
        if (node.type != NodeType::Product || node.children.empty()) continue;
        std::vector<NodeId> kept;
        for (NodeId c : node.children)
            if (!scope[static_cast<std::size_t>(c)].is_subset_of(next_step)) kept.push_back(c);
        node.children = std::move(kept);
    }
    out = compact(out);

    std::vector<VarSet> check = scope_of(out);
    for (NodeId id = 0; id < static_cast<NodeId>(out.nodes.size()); ++id)
        if (check[static_cast<std::size_t>(id)].intersects(next_step))
            throw std::runtime_error("extract_one_step: next-step variables survived extraction");
    return out;
}

namespace {

// Interface-children recursion. A product without sum children is itself a
// state distribution; a product with sum children yields one set per
// combination of branch choices across its sum children, each augmented with
// the product's non-sum children. Sums pass through to their branches. Sets
// are id-sorted for deterministic dedup.
void ir_children(const Network& net, NodeId id, std::vector<std::vector<NodeId>>& out) {
    const Node& node = net.at(id);
    if (node.type == NodeType::Sum) {
        for (NodeId c : node.children) ir_children(net, c, out);
        return;
    }
    if (node.type == NodeType::Product) {
        std::vector<NodeId> sum_children;
        std::vector<NodeId> other_children;
        for (NodeId c : node.children) {
            if (net.at(c).type == NodeType::Sum)
                sum_children.push_back(c);
            else
                other_children.push_back(c);
        }
        if (!sum_children.empty()) {
            std::vector<std::vector<NodeId>> combos{other_children};
            for (NodeId c : sum_children) {
                std::vector<std::vector<NodeId>> branch_sets;
                ir_children(net, c, branch_sets);
                std::vector<std::vector<NodeId>> next;
                next.reserve(combos.size() * branch_sets.size());
                for (const std::vector<NodeId>& combo : combos) {
                    for (const std::vector<NodeId>& branch : branch_sets) {
                        std::vector<NodeId> merged = combo;
                        merged.insert(merged.end(), branch.begin(), branch.end());
                        next.push_back(std::move(merged));
                    }
                }
                combos = std::move(next);
            }
            for (std::vector<NodeId>& set : combos) {
                std::sort(set.begin(), set.end());
                set.erase(std::unique(set.begin(), set.end()), set.end());
                out.push_back(std::move(set));
            }
            return;
        }
    }
    out.push_back({id});
}

}  // namespace

InterfaceDiscovery discover_interface_roots(const Network& s1) {
    if (s1.roots.size() != 1) throw std::runtime_error("discover_interface_roots: expected a single root");
    std::vector<VarSet> scope = scope_of(s1);
    const VarSet& full = scope[static_cast<std::size_t>(s1.roots[0])];

    // Top-most products covering every step-0 variable whose children each
    // cover a proper subset.
    std::vector<std::vector<NodeId>> sets;
    std::vector<bool> seen(s1.nodes.size(), false);
    std::vector<NodeId> queue{s1.roots[0]};
    seen[static_cast<std::size_t>(s1.roots[0])] = true;
    for (std::size_t qi = 0; qi < queue.size(); ++qi) {
        const NodeId id = queue[qi];
        const Node& node = s1.at(id);
        bool attachment = false;
        if (node.type == NodeType::Product && scope[static_cast<std::size_t>(id)] == full) {
            attachment = true;
            for (NodeId c : node.children)
                if (scope[static_cast<std::size_t>(c)] == full) attachment = false;
        }
        if (attachment) {
            ir_children(s1, id, sets);
            continue;
        }
        for (NodeId c : node.children) {
            if (!seen[static_cast<std::size_t>(c)]) {
                seen[static_cast<std::size_t>(c)] = true;
                queue.push_back(c);
            }
        }
    }

    // Distinct state distributions only.
    std::set<std::vector<NodeId>> dedup;
    std::vector<std::vector<NodeId>> distinct;
    for (std::vector<NodeId>& set : sets)
        if (dedup.insert(set).second) distinct.push_back(std::move(set));
    if (distinct.empty())
        throw std::runtime_error("discover_interface_roots: no interface roots found");

    Network ir_net = s1;
    ir_net.roots.clear();
    for (const std::vector<NodeId>& set : distinct) {
        Node product;
        product.type = NodeType::Product;
        product.children = set;
        ir_net.roots.push_back(ir_net.add(std::move(product)));
    }
    ir_net = compact(ir_net);

    // Interface roots must agree on scope before the template can be sound.
    std::vector<VarSet> ir_scope = scope_of(ir_net);
    for (std::size_t r = 1; r < ir_net.roots.size(); ++r)
        if (!(ir_scope[static_cast<std::size_t>(ir_net.roots[r])] ==
              ir_scope[static_cast<std::size_t>(ir_net.roots[0])]))
            throw std::runtime_error("discover_interface_roots: interface roots have unequal scopes");

    // The network below the interface roots speaks only step-0 variables now.
    ir_net.num_vars = s1.num_vars / 2;

    const int count = static_cast<int>(ir_net.roots.size());
    TopNetwork top;
    top.network.num_vars = ir_net.num_vars;
    Node top_sum;
    top_sum.type = NodeType::Sum;
    for (int i = 0; i < count; ++i) {
        Node latent;
        latent.type = NodeType::LatentInterface;
        latent.interface_index = i;
        top_sum.children.push_back(top.network.add(std::move(latent)));
        top_sum.weights.push_back(1.0 / count);
    }
    top.network.roots = {top.network.add(std::move(top_sum))};
    return {std::move(top), std::move(ir_net)};
}

TemplateNetwork build_initial_template(const Network& ir_network) {
    if (ir_network.roots.empty())
        throw std::runtime_error("build_initial_template: no interface roots");
    TemplateNetwork temp;
    temp.network = ir_network;
    Network& net = temp.network;
    const int count = static_cast<int>(net.roots.size());

    auto make_latent_sum = [&]() {
        Node sum;
        sum.type = NodeType::Sum;
        for (int i = 0; i < count; ++i) {
            Node latent;
            latent.type = NodeType::LatentInterface;
            latent.interface_index = i;
            const NodeId leaf = net.add(std::move(latent));
            temp.latent_leaves.push_back(leaf);
            sum.children.push_back(leaf);
            sum.weights.push_back(1.0 / count);
        }
        return net.add(std::move(sum));
    };

    // One shared traversal across all roots so DAG-shared nodes are augmented
    // exactly once.
    std::vector<bool> seen(net.nodes.size(), false);
    std::vector<NodeId> queue;
    for (NodeId r : net.roots) {
        if (!seen[static_cast<std::size_t>(r)]) {
            seen[static_cast<std::size_t>(r)] = true;
            queue.push_back(r);
        }
    }
    for (std::size_t qi = 0; qi < queue.size(); ++qi) {
        const NodeId id = queue[qi];
        if (net.at(id).is_leaf()) continue;
        bool all_leaves = true;
        for (NodeId c : net.at(id).children)
            if (!net.at(c).is_leaf()) all_leaves = false;
        if (!all_leaves) {
            for (NodeId c : net.at(id).children) {
                if (!seen[static_cast<std::size_t>(c)]) {
                    seen[static_cast<std::size_t>(c)] = true;
                    queue.push_back(c);
                }
            }
            continue;
        }
        // Bottom-most node: products take the latent sum as an extra child,
        // sums and max nodes get each leaf child wrapped with one.
        if (net.at(id).type == NodeType::Product) {
            const NodeId latent_sum = make_latent_sum();
            net.at(id).children.push_back(latent_sum);
        } else {
            const std::vector<NodeId> children = net.at(id).children;
            for (std::size_t k = 0; k < children.size(); ++k) {
                const NodeId latent_sum = make_latent_sum();
                Node wrap;
                wrap.type = NodeType::Product;
                wrap.children = {children[k], latent_sum};
                const NodeId wrapped = net.add(std::move(wrap));
                net.at(id).children[k] = wrapped;
            }
        }
    }
    return temp;
}

namespace {

struct RecordPass {
    std::vector<std::vector<std::uint64_t>> edge_counts;
    std::vector<std::uint64_t> node_visits;
    std::size_t skipped = 0;
    std::size_t conservation_violations = 0;
    std::vector<std::vector<DualValue>> last_lls;
    DualValue last_top{};
};

// Evidence for one tuple over the one-step variables; utilities are snapped to
// the nearest constant the model knows so exact-match gating stays exact.
Evidence tuple_evidence(const RspmnModel& model, const StepTuple& tup, VarId uvar,
                        const std::vector<double>& utility_constants, bool include_utility) {
    Evidence ev(static_cast<int>(model.variables.size()));
    int idx = 0;
    for (std::size_t v = 0; v < model.variables.size(); ++v) {
        if (static_cast<VarId>(v) == uvar) continue;
        ev.set(static_cast<VarId>(v), tup.values.at(static_cast<std::size_t>(idx)));
        ++idx;
    }
    if (include_utility && !utility_constants.empty()) {
        auto it = std::lower_bound(utility_constants.begin(), utility_constants.end(), tup.utility);
        double snapped;
        if (it == utility_constants.end()) {
            snapped = utility_constants.back();
        } else if (it == utility_constants.begin()) {
            snapped = utility_constants.front();
        } else {
            snapped = (tup.utility - *(it - 1) <= *it - tup.utility) ? *(it - 1) : *it;
        }
        ev.set(uvar, snapped);
    }
    return ev;
}

std::vector<double> collect_utility_constants(const Network& net) {
    std::vector<double> values;
    for (const Node& node : net.nodes)
        if (node.type == NodeType::UtilityLeaf) values.push_back(node.value);
    std::sort(values.begin(), values.end());
    values.erase(std::unique(values.begin(), values.end()), values.end());
    return values;
}

}  // namespace

HardEmResult hard_em_refine(const RspmnModel& initial, const SequenceDataset& data,
                            const HardEmOptions& opts) {
    if (opts.epochs < 1) throw std::runtime_error("hard_em_refine: epochs must be >= 1");
    {
        ValidityReport report = check_template_sound(initial.temp);
        if (!report.all_pass())
            throw std::runtime_error("hard_em_refine: initial template is not sound\n" + report.to_string());
    }
    HardEmResult result;
    result.model = initial;
    const VarId uvar = data.utility_var();

    for (int epoch = 0; epoch < opts.epochs; ++epoch) {
        RspmnModel& model = result.model;
        const Network& tnet = model.temp.network;
        const NetworkEvaluator template_eval(tnet);
        const NetworkEvaluator top_eval(model.top.network);
        const std::vector<double> utility_constants = collect_utility_constants(tnet);
        const std::size_t node_count = tnet.nodes.size();

        // Latent sums are skipped in the bottom-most step of each record.
        std::vector<bool> is_latent_sum(node_count, false);
        for (NodeId id = 0; id < static_cast<NodeId>(node_count); ++id) {
            const Node& node = tnet.at(id);
            if (node.type != NodeType::Sum || node.children.empty()) continue;
            bool all_latent = true;
            for (NodeId c : node.children)
                if (tnet.at(c).type != NodeType::LatentInterface) all_latent = false;
            is_latent_sum[static_cast<std::size_t>(id)] = all_latent;
        }

        const std::size_t num_records = data.episodes.size();
        const int threads = std::max(1, opts.threads);

        std::vector<RecordPass> workers(static_cast<std::size_t>(threads));
        std::vector<double> record_ll(num_records, std::numeric_limits<double>::quiet_NaN());

        auto run_range = [&](RecordPass& pass, std::size_t begin, std::size_t end) {
            pass.edge_counts.assign(node_count, {});
            pass.node_visits.assign(node_count, 0);
            for (NodeId id = 0; id < static_cast<NodeId>(node_count); ++id)
                if (tnet.at(id).type == NodeType::Sum)
                    pass.edge_counts[static_cast<std::size_t>(id)].assign(tnet.at(id).children.size(), 0);

            std::vector<std::vector<DualValue>> tables;
            std::vector<DualValue> top_table;
            for (std::size_t rec = begin; rec < end; ++rec) {
                const Episode& episode = data.episodes[rec];
                if (episode.empty()) continue;
                const std::size_t len = episode.size();
                tables.assign(len, {});
                std::vector<Evidence> step_ev;
                step_ev.reserve(len);
                for (std::size_t t = 0; t < len; ++t)
                    step_ev.push_back(tuple_evidence(model, episode[t], uvar, utility_constants, true));

                // Backward likelihood sweep with per-step rescaling; the
                // record likelihood is recovered from the accumulated scale.
                double log_scale = 0.0;
                LatentInputs latent;
                bool dead = false;
                std::vector<std::vector<DualValue>> step_roots(len);
                for (std::size_t t = len; t-- > 0;) {
                    latent.allow_default = true;
                    if (t + 1 < len) latent.values = step_roots[t + 1];
                    else latent.values.clear();
                    EvalResult r = template_eval.evaluate(step_ev[t], latent, EvalMode::Likelihood, tables[t]);
                    double peak = 0.0;
                    for (const DualValue& d : r.root_values) peak = std::max(peak, d.likelihood);
                    if (peak <= 0.0) {
                        dead = true;
                        break;
                    }
                    log_scale += std::log(peak);
                    for (DualValue& d : r.root_values) d.likelihood /= peak;
                    for (DualValue& d : tables[t]) d.likelihood /= peak;
                    step_roots[t] = std::move(r.root_values);
                }
                DualValue top_value{};
                if (!dead) {
                    LatentInputs top_latent;
                    top_latent.values = step_roots[0];
                    const Evidence empty_ev(static_cast<int>(model.variables.size()));
                    EvalResult r = top_eval.evaluate(empty_ev, top_latent, EvalMode::Likelihood, top_table);
                    top_value = r.root_values[0];
                    if (top_value.likelihood <= 0.0) dead = true;
                }
                if (dead) {
                    ++pass.skipped;
                    continue;
                }
                record_ll[rec] = std::log(top_value.likelihood) + log_scale;

                // Top-down pass. The top network picks the entry interface
                // root without counting; template sums count the argmax edge.
                std::vector<std::pair<NodeId, std::size_t>> walk;  // (node, step)

                auto descend_sum = [&](const Network& net, NodeId id,
                                       const std::vector<DualValue>& table, bool count) -> NodeId {
                    const Node& node = net.at(id);
                    int best = -1;
                    double best_mass = -1.0;
                    for (std::size_t k = 0; k < node.children.size(); ++k) {
                        const double mass =
                            node.weights[k] *
                            table[static_cast<std::size_t>(node.children[k])].likelihood;
                        if (mass > best_mass) {
                            best_mass = mass;
                            best = static_cast<int>(k);
                        }
                    }
                    if (best < 0) return -1;
                    if (count) {
                        pass.edge_counts[static_cast<std::size_t>(id)][static_cast<std::size_t>(best)]++;
                        pass.node_visits[static_cast<std::size_t>(id)]++;
                    }
                    return node.children[static_cast<std::size_t>(best)];
                };

                // Entry: walk the top network (selection only, no counts).
                {
                    std::vector<NodeId> stack{model.top.network.roots[0]};
                    while (!stack.empty()) {
                        const NodeId id = stack.back();
                        stack.pop_back();
                        const Node& node = model.top.network.at(id);
                        if (node.type == NodeType::LatentInterface) {
                            walk.push_back({tnet.roots.at(static_cast<std::size_t>(node.interface_index)), 0});
                        } else if (node.type == NodeType::Sum) {
                            const NodeId next = descend_sum(model.top.network, id, top_table, false);
                            if (next >= 0) stack.push_back(next);
                        } else {
                            for (NodeId c : node.children) stack.push_back(c);
                        }
                    }
                }

                while (!walk.empty()) {
                    auto [id, step] = walk.back();
                    walk.pop_back();
                    const Node& node = tnet.at(id);
                    const bool bottom = (step + 1 == len);
                    switch (node.type) {
                        case NodeType::Sum: {
                            if (is_latent_sum[static_cast<std::size_t>(id)] && bottom)
                                break;  // bottom copy has no latent leaves
                            const NodeId next = descend_sum(tnet, id, tables[step], true);
                            if (next < 0) break;
                            if (is_latent_sum[static_cast<std::size_t>(id)]) {
                                const int i = tnet.at(next).interface_index;
                                walk.push_back({tnet.roots.at(static_cast<std::size_t>(i)), step + 1});
                            } else {
                                walk.push_back({next, step});
                            }
                            break;
                        }
                        case NodeType::Max: {
                            if (!step_ev[step].observed(node.var)) break;
                            const int v = static_cast<int>(step_ev[step].get(node.var));
                            for (std::size_t k = 0; k < node.children.size(); ++k)
                                if (node.edge_labels[k] == v) {
                                    walk.push_back({node.children[k], step});
                                    break;
                                }
                            break;
                        }
                        case NodeType::Product:
                            for (NodeId c : node.children) {
                                if (bottom && (is_latent_sum[static_cast<std::size_t>(c)] ||
                                               tnet.at(c).type == NodeType::LatentInterface))
                                    continue;
                                walk.push_back({c, step});
                            }
                            break;
                        default:
                            break;
                    }
                }
                if (rec + 1 == num_records) {
                    pass.last_lls = step_roots;
                    pass.last_top = top_value;
                }
            }
        };

        if (threads == 1) {
            run_range(workers[0], 0, num_records);
        } else {
            std::vector<std::thread> pool;
            const std::size_t chunk = (num_records + static_cast<std::size_t>(threads) - 1) /
                                      static_cast<std::size_t>(threads);
            for (int w = 0; w < threads; ++w) {
                const std::size_t begin = static_cast<std::size_t>(w) * chunk;
                const std::size_t end = std::min(num_records, begin + chunk);
                pool.emplace_back([&, w, begin, end] { run_range(workers[static_cast<std::size_t>(w)], begin, end); });
            }
            for (std::thread& t : pool) t.join();
        }

        // Merge worker tallies in worker order (integer adds, order-free).
        HardEmState state;
        state.edge_counts.assign(node_count, {});
        state.node_visits.assign(node_count, 0);
        for (NodeId id = 0; id < static_cast<NodeId>(node_count); ++id)
            if (tnet.at(id).type == NodeType::Sum)
                state.edge_counts[static_cast<std::size_t>(id)].assign(tnet.at(id).children.size(), 0);
        HardEmEpochReport report;
        for (RecordPass& pass : workers) {
            if (pass.node_visits.empty()) continue;
            for (std::size_t id = 0; id < node_count; ++id) {
                state.node_visits[id] += pass.node_visits[id];
                for (std::size_t k = 0; k < pass.edge_counts[id].size(); ++k)
                    state.edge_counts[id][k] += pass.edge_counts[id][k];
            }
            report.skipped_records += pass.skipped;
            result.conservation_violations += pass.conservation_violations;
            if (!pass.last_lls.empty()) {
                state.last_record_lls = pass.last_lls;
                state.last_record_top = pass.last_top;
            }
        }
        double ll_total = 0.0;
        std::size_t ll_count = 0;
        for (double ll : record_ll) {
            if (std::isnan(ll)) continue;
            ll_total += ll;
            ++ll_count;
        }
        report.mean_ll = ll_count ? ll_total / static_cast<double>(ll_count) : 0.0;

        // Count conservation per sum node.
        for (std::size_t id = 0; id < node_count; ++id) {
            if (tnet.at(static_cast<NodeId>(id)).type != NodeType::Sum) continue;
            std::uint64_t total = 0;
            for (std::uint64_t c : state.edge_counts[id]) total += c;
            if (total != state.node_visits[id]) ++result.conservation_violations;
        }

        // Weight update: visited sums become per-epoch edge frequencies.
        RspmnModel updated = result.model;
        double max_delta = 0.0;
        for (NodeId id = 0; id < static_cast<NodeId>(node_count); ++id) {
            Node& node = updated.temp.network.at(id);
            if (node.type != NodeType::Sum) continue;
            const std::uint64_t visits = state.node_visits[static_cast<std::size_t>(id)];
            if (visits == 0) continue;
            double denom = static_cast<double>(visits) +
                           opts.count_smoothing * static_cast<double>(node.children.size());
            for (std::size_t k = 0; k < node.children.size(); ++k) {
                const double w =
                    (static_cast<double>(state.edge_counts[static_cast<std::size_t>(id)][k]) +
                     opts.count_smoothing) /
                    denom;
                max_delta = std::max(max_delta, std::fabs(w - node.weights[k]));
                node.weights[k] = w;
            }
        }
        report.max_weight_delta = max_delta;

        // Prune zero-count latent leaves from visited latent sums. A visited
        // sum always keeps at least one counted child, so the sum (and with it
        // the latent scope of every branch) survives; unvisited latent sums
        // keep their uniform continuation untouched. Kept-child indices are
        // tracked so the count state can be remapped onto the pruned network.
        std::vector<std::vector<std::size_t>> kept_child_idx(node_count);
        std::size_t pruned_edges = 0;
        for (NodeId id = 0; id < static_cast<NodeId>(node_count); ++id) {
            Node& node = updated.temp.network.at(id);
            if (node.is_leaf()) continue;
            auto& kept_idx = kept_child_idx[static_cast<std::size_t>(id)];
            kept_idx.resize(node.children.size());
            std::iota(kept_idx.begin(), kept_idx.end(), 0u);
            if (node.type != NodeType::Sum || !is_latent_sum[static_cast<std::size_t>(id)]) continue;
            if (state.node_visits[static_cast<std::size_t>(id)] == 0) continue;
            std::vector<NodeId> kept;
            std::vector<double> weights;
            kept_idx.clear();
            for (std::size_t k = 0; k < node.children.size(); ++k) {
                if (state.edge_counts[static_cast<std::size_t>(id)][k] == 0) {
                    ++pruned_edges;
                    continue;
                }
                kept.push_back(node.children[k]);
                weights.push_back(node.weights[k]);
                kept_idx.push_back(k);
            }
            double total = 0.0;
            for (double w : weights) total += w;
            for (double& w : weights) w /= total;
            node.children = std::move(kept);
            node.weights = std::move(weights);
        }

        // Rebuild the template without the dropped nodes and carry the counts
        // over to the new ids.
        std::vector<NodeId> remap;
        updated.temp.network = compact(updated.temp.network, &remap);
        std::vector<NodeId> latent_left;
        for (NodeId leaf : updated.temp.latent_leaves) {
            const NodeId mapped = remap[static_cast<std::size_t>(leaf)];
            if (mapped >= 0) latent_left.push_back(mapped);
        }
        updated.temp.latent_leaves = std::move(latent_left);

        HardEmState mapped_state;
        mapped_state.edge_counts.assign(updated.temp.network.nodes.size(), {});
        mapped_state.node_visits.assign(updated.temp.network.nodes.size(), 0);
        mapped_state.last_record_lls = state.last_record_lls;
        mapped_state.last_record_top = state.last_record_top;
        for (NodeId id = 0; id < static_cast<NodeId>(node_count); ++id) {
            const NodeId mapped = remap[static_cast<std::size_t>(id)];
            if (mapped < 0) continue;
            mapped_state.node_visits[static_cast<std::size_t>(mapped)] =
                state.node_visits[static_cast<std::size_t>(id)];
            if (state.edge_counts[static_cast<std::size_t>(id)].empty()) continue;
            auto& counts = mapped_state.edge_counts[static_cast<std::size_t>(mapped)];
            for (std::size_t k : kept_child_idx[static_cast<std::size_t>(id)])
                counts.push_back(state.edge_counts[static_cast<std::size_t>(id)][k]);
        }
        state = std::move(mapped_state);

        // Interface roots never referenced by a surviving template latent leaf
        // are recorded; the top network still reaches them.
        std::vector<bool> referenced(updated.temp.network.roots.size(), false);
        for (NodeId leaf : updated.temp.latent_leaves)
            referenced[static_cast<std::size_t>(updated.temp.network.at(leaf).interface_index)] = true;
        updated.unreferenced_interface_roots.clear();
        for (std::size_t i = 0; i < referenced.size(); ++i)
            if (!referenced[i]) updated.unreferenced_interface_roots.push_back(static_cast<int>(i));

        report.pruned_latent_edges = pruned_edges;
        report.template_nodes = updated.temp.network.nodes.size();
        const ValidityReport sound_report = check_template_sound(updated.temp);
        report.template_sound = sound_report.all_pass();
        if (!report.template_sound)
            throw std::runtime_error("hard_em_refine: template lost soundness after epoch " +
                                     std::to_string(epoch + 1) + "\n" + sound_report.to_string());

        result.model = std::move(updated);
        result.state = std::move(state);
        result.epochs.push_back(report);
        if (report.max_weight_delta <= opts.early_stop_delta && pruned_edges == 0) break;
    }
    return result;
}

LearnRspmnResult learn_rspmn(const SequenceDataset& data, const LearnParams& lp,
                             const HardEmOptions& em) {
    using Clock = std::chrono::steady_clock;
    LearnRspmnResult result;

    const auto t0 = Clock::now();
    TwoStepTable table = wrap_two_step(data, lp.max_utility_buckets);
    result.wrap_rows = static_cast<double>(table.rows);
    result.two_step = learn_spmn(table, table.order, lp);
    {
        ValidityReport report = check_spmn_valid(result.two_step);
        if (!report.all_pass())
            throw std::runtime_error("learn_rspmn: two-step SPMN is invalid\n" + report.to_string());
    }
    Network s1 = extract_one_step(result.two_step);
    InterfaceDiscovery discovery = discover_interface_roots(s1);
    TemplateNetwork initial = build_initial_template(discovery.ir_network);

    RspmnModel model;
    model.variables = data.variables;
    model.partial_order = data.partial_order;
    model.top = std::move(discovery.top);
    model.temp = std::move(initial);
    result.initial_model = model;
    result.initial_seconds = std::chrono::duration<double>(Clock::now() - t0).count();

    const auto t1 = Clock::now();
    result.em = hard_em_refine(model, data, em);
    result.model = result.em.model;
    result.refine_seconds = std::chrono::duration<double>(Clock::now() - t1).count();
    return result;
}

}  // namespace rspmn
