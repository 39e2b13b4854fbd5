#include "rspmn/learnspmn.hpp"

#include <cmath>
#include <map>
#include <numeric>
#include <random>

namespace rspmn {

namespace {

// splitmix64, used to derive independent stream seeds.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
    std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

double gamma_p_series(double a, double x) {
    double sum = 1.0 / a;
    double term = sum;
    for (int n = 1; n < 500; ++n) {
        term *= x / (a + n);
        sum += term;
        if (std::fabs(term) < std::fabs(sum) * 1e-15) break;
    }
    return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

double gamma_q_contfrac(double a, double x) {
    // Lentz's continued fraction for Q(a, x), x > a + 1.
    const double tiny = 1e-300;
    double b = x + 1.0 - a;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i < 500; ++i) {
        const double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
        b += 2.0;
        d = an * d + b;
        if (std::fabs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double delta = d * c;
        h *= delta;
        if (std::fabs(delta - 1.0) < 1e-15) break;
    }
    return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

}  // namespace

double chi_square_sf(double x, int df) {
    if (df <= 0) return 1.0;
    if (x <= 0.0) return 1.0;
    const double a = 0.5 * df;
    const double half_x = 0.5 * x;
    if (half_x < a + 1.0) return 1.0 - gamma_p_series(a, half_x);
    return gamma_q_contfrac(a, half_x);
}

double g_test_p_value(const std::vector<int>& col_a, const std::vector<int>& col_b,
                      const std::vector<std::uint32_t>& rows, int card_a, int card_b) {
    std::vector<double> counts(static_cast<std::size_t>(card_a) * static_cast<std::size_t>(card_b), 0.0);
    std::vector<double> row_tot(static_cast<std::size_t>(card_a), 0.0);
    std::vector<double> col_tot(static_cast<std::size_t>(card_b), 0.0);
    for (std::uint32_t r : rows) {
        const int a = col_a[r];
        const int b = col_b[r];
        counts[static_cast<std::size_t>(a) * static_cast<std::size_t>(card_b) + static_cast<std::size_t>(b)] += 1.0;
        row_tot[static_cast<std::size_t>(a)] += 1.0;
        col_tot[static_cast<std::size_t>(b)] += 1.0;
    }
    const double n = static_cast<double>(rows.size());
    int support_a = 0, support_b = 0;
    for (int a = 0; a < card_a; ++a)
        if (row_tot[static_cast<std::size_t>(a)] > 0) ++support_a;
    for (int b = 0; b < card_b; ++b)
        if (col_tot[static_cast<std::size_t>(b)] > 0) ++support_b;
    const int df = (support_a - 1) * (support_b - 1);
    if (df <= 0 || n == 0.0) return 1.0;

    double g = 0.0;
    for (int a = 0; a < card_a; ++a) {
        if (row_tot[static_cast<std::size_t>(a)] == 0) continue;
        for (int b = 0; b < card_b; ++b) {
            const double o = counts[static_cast<std::size_t>(a) * static_cast<std::size_t>(card_b) + static_cast<std::size_t>(b)];
            if (o == 0.0) continue;
            const double e = row_tot[static_cast<std::size_t>(a)] * col_tot[static_cast<std::size_t>(b)] / n;
            g += o * std::log(o / e);
        }
    }
    g *= 2.0;
    return chi_square_sf(g, df);
}

namespace {

int column_cardinality(const TwoStepTable& table, VarId v) {
    const VariableMeta& meta = table.variables[static_cast<std::size_t>(v)];
    if (meta.kind == VarKind::Utility)
        return std::max<int>(1, static_cast<int>(table.utility_values[static_cast<std::size_t>(v)].size()));
    return meta.cardinality;
}

struct UnionFind {
    std::vector<int> parent;
    explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
    int find(int x) {
        while (parent[static_cast<std::size_t>(x)] != x) {
            parent[static_cast<std::size_t>(x)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
            x = parent[static_cast<std::size_t>(x)];
        }
        return x;
    }
    void unite(int a, int b) {
        a = find(a);
        b = find(b);
        if (a != b) parent[static_cast<std::size_t>(std::max(a, b))] = std::min(a, b);
    }
};

}  // namespace

std::optional<std::vector<std::vector<VarId>>> independence_split(
    const TwoStepTable& table, const std::vector<std::uint32_t>& rows,
    const std::vector<VarId>& vars, double threshold) {
    const std::size_t n = vars.size();
    if (n < 2) return std::nullopt;
    UnionFind uf(n);
    for (std::size_t i = 0; i + 1 < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const double p = g_test_p_value(table.columns[static_cast<std::size_t>(vars[i])],
                                            table.columns[static_cast<std::size_t>(vars[j])], rows,
                                            column_cardinality(table, vars[i]),
                                            column_cardinality(table, vars[j]));
            if (p < threshold) uf.unite(static_cast<int>(i), static_cast<int>(j));
        }
    }
    std::map<int, std::vector<VarId>> groups;
    for (std::size_t i = 0; i < n; ++i) groups[uf.find(static_cast<int>(i))].push_back(vars[i]);
    if (groups.size() < 2) return std::nullopt;
    std::vector<std::vector<VarId>> result;
    result.reserve(groups.size());
    for (auto& [root, members] : groups) result.push_back(std::move(members));
    return result;
}

std::vector<std::vector<std::uint32_t>> cluster_rows(const TwoStepTable& table,
                                                     const std::vector<std::uint32_t>& rows,
                                                     const std::vector<VarId>& vars, int k,
                                                     std::uint64_t seed, int restarts) {
    if (rows.empty()) throw std::runtime_error("cluster_rows: empty row set");
    if (k < 2) throw std::runtime_error("cluster_rows: k must be >= 2");

    // Probe for at least k distinct row patterns; below that, the distinct-row
    // partition is returned as-is.
    std::size_t distinct_count = 0;
    {
        std::map<std::vector<int>, std::size_t> index;
        std::vector<int> key(vars.size());
        for (std::uint32_t r : rows) {
            for (std::size_t i = 0; i < vars.size(); ++i) key[i] = table.columns[static_cast<std::size_t>(vars[i])][r];
            index.emplace(key, index.size());
            if (static_cast<int>(index.size()) > k) break;
        }
        distinct_count = index.size();
    }
    if (static_cast<int>(distinct_count) <= k) {
        std::vector<std::vector<std::uint32_t>> result;
        std::map<std::vector<int>, std::size_t> index;
        std::vector<int> key(vars.size());
        for (std::uint32_t r : rows) {
            for (std::size_t i = 0; i < vars.size(); ++i) key[i] = table.columns[static_cast<std::size_t>(vars[i])][r];
            auto [it, inserted] = index.emplace(key, result.size());
            if (inserted) result.emplace_back();
            result[it->second].push_back(r);
        }
        return result;
    }

    const std::size_t ncols = vars.size();
    std::vector<const int*> cols(ncols);
    for (std::size_t i = 0; i < ncols; ++i) cols[i] = table.columns[static_cast<std::size_t>(vars[i])].data();
    auto hamming = [&](std::uint32_t r, const std::vector<int>& mode) {
        int d = 0;
        for (std::size_t i = 0; i < ncols; ++i)
            if (cols[i][r] != mode[i]) ++d;
        return d;
    };

    std::vector<int> best_assign;
    long best_cost = -1;
    for (int restart = 0; restart < std::max(1, restarts); ++restart) {
        std::mt19937_64 rng(mix_seed(seed, static_cast<std::uint64_t>(restart)));
        std::vector<std::vector<int>> modes;
        std::uniform_int_distribution<std::size_t> pick(0, rows.size() - 1);
        int guard = 0;
        while (static_cast<int>(modes.size()) < k && guard < 200) {
            ++guard;
            const std::uint32_t r = rows[pick(rng)];
            std::vector<int> mode(ncols);
            for (std::size_t i = 0; i < ncols; ++i) mode[i] = table.columns[static_cast<std::size_t>(vars[i])][r];
            if (std::find(modes.begin(), modes.end(), mode) == modes.end()) modes.push_back(std::move(mode));
        }
        if (static_cast<int>(modes.size()) < k) continue;

        std::vector<int> cards(ncols);
        for (std::size_t i = 0; i < ncols; ++i) cards[i] = column_cardinality(table, vars[i]);
        std::vector<int> offsets(ncols + 1, 0);
        for (std::size_t i = 0; i < ncols; ++i) offsets[i + 1] = offsets[i] + cards[i];
        std::vector<std::uint32_t> freq(static_cast<std::size_t>(k) *
                                        static_cast<std::size_t>(offsets[ncols]));

        std::vector<int> assign(rows.size(), 0);
        long cost = 0;
        for (int iter = 0; iter < 20; ++iter) {
            bool changed = false;
            cost = 0;
            for (std::size_t idx = 0; idx < rows.size(); ++idx) {
                int best_c = 0;
                int best_d = hamming(rows[idx], modes[0]);
                for (int c = 1; c < k; ++c) {
                    const int d = hamming(rows[idx], modes[static_cast<std::size_t>(c)]);
                    if (d < best_d) {
                        best_d = d;
                        best_c = c;
                    }
                }
                if (assign[idx] != best_c) {
                    assign[idx] = best_c;
                    changed = true;
                }
                cost += best_d;
            }
            if (!changed && iter > 0) break;
            // recompute modes: most frequent value per column, ties to the smallest
            std::fill(freq.begin(), freq.end(), 0u);
            for (std::size_t idx = 0; idx < rows.size(); ++idx) {
                const std::size_t base = static_cast<std::size_t>(assign[idx]) *
                                         static_cast<std::size_t>(offsets[ncols]);
                for (std::size_t i = 0; i < ncols; ++i)
                    ++freq[base + static_cast<std::size_t>(offsets[i]) +
                           static_cast<std::size_t>(cols[i][rows[idx]])];
            }
            for (int c = 0; c < k; ++c) {
                const std::size_t base =
                    static_cast<std::size_t>(c) * static_cast<std::size_t>(offsets[ncols]);
                for (std::size_t i = 0; i < ncols; ++i) {
                    std::uint32_t best_n = 0;
                    int best_v = modes[static_cast<std::size_t>(c)][i];
                    for (int v = 0; v < cards[i]; ++v) {
                        const std::uint32_t n =
                            freq[base + static_cast<std::size_t>(offsets[i]) + static_cast<std::size_t>(v)];
                        if (n > best_n) {
                            best_n = n;
                            best_v = v;
                        }
                    }
                    modes[static_cast<std::size_t>(c)][i] = best_v;
                }
            }
        }
        if (best_cost < 0 || cost < best_cost) {
            best_cost = cost;
            best_assign = assign;
        }
    }

    if (best_assign.empty()) {
        // no distinct seeds found; degrade to a single cluster
        return {rows};
    }
    std::vector<std::vector<std::uint32_t>> result(static_cast<std::size_t>(k));
    for (std::size_t idx = 0; idx < rows.size(); ++idx)
        result[static_cast<std::size_t>(best_assign[idx])].push_back(rows[idx]);
    result.erase(std::remove_if(result.begin(), result.end(),
                                [](const std::vector<std::uint32_t>& c) { return c.empty(); }),
                 result.end());
    return result;
}

namespace {

class SpmnLearner {
  public:
    SpmnLearner(const TwoStepTable& table, const PartialOrder& order, const LearnParams& hp)
        : table_(table), order_(order), hp_(hp) {
        net_.num_vars = table.column_count();
        var_slot_.assign(static_cast<std::size_t>(table.column_count()), -1);
        for (std::size_t s = 0; s < order.slots.size(); ++s) {
            const Slot& slot = order.slots[s];
            if (slot.is_decision) {
                var_slot_[static_cast<std::size_t>(slot.decision_var)] = static_cast<int>(s);
            } else {
                for (VarId v : slot.info_vars) var_slot_[static_cast<std::size_t>(v)] = static_cast<int>(s);
            }
        }
    }

    Network run() {
        if (table_.rows == 0) throw std::runtime_error("learn_spmn: empty table");
        std::vector<std::uint32_t> rows(table_.rows);
        std::iota(rows.begin(), rows.end(), 0u);
        std::vector<VarId> vars(static_cast<std::size_t>(table_.column_count()));
        std::iota(vars.begin(), vars.end(), 0);
        const NodeId root = learn(rows, vars);
        net_.roots = {root};
        return std::move(net_);
    }

  private:
    NodeId categorical_leaf(const std::vector<std::uint32_t>& rows, VarId v) {
        const int card = table_.variables[static_cast<std::size_t>(v)].cardinality;
        Node node;
        node.type = NodeType::CategoricalLeaf;
        node.var = v;
        node.probs.assign(static_cast<std::size_t>(card), 0.0);
        for (std::uint32_t r : rows) node.probs[static_cast<std::size_t>(table_.columns[static_cast<std::size_t>(v)][r])] += 1.0;
        const double denom = static_cast<double>(rows.size()) + hp_.laplace_alpha * card;
        for (double& p : node.probs) p = (p + hp_.laplace_alpha) / denom;
        return net_.add(std::move(node));
    }

    NodeId utility_sum(const std::vector<std::uint32_t>& rows, VarId v) {
        std::map<int, std::size_t> freq;
        for (std::uint32_t r : rows) ++freq[table_.columns[static_cast<std::size_t>(v)][r]];
        Node sum;
        sum.type = NodeType::Sum;
        for (const auto& [code, count] : freq) {
            Node leaf;
            leaf.type = NodeType::UtilityLeaf;
            leaf.var = v;
            leaf.value = table_.utility_values[static_cast<std::size_t>(v)].at(static_cast<std::size_t>(code));
            sum.children.push_back(net_.add(std::move(leaf)));
            sum.weights.push_back(static_cast<double>(count) / static_cast<double>(rows.size()));
        }
        return net_.add(std::move(sum));
    }

    NodeId leaf_for(const std::vector<std::uint32_t>& rows, VarId v) {
        return table_.variables[static_cast<std::size_t>(v)].kind == VarKind::Utility
                   ? utility_sum(rows, v)
                   : categorical_leaf(rows, v);
    }

    // Earliest slot holding an active variable; -1 when only utilities remain.
    int earliest_active_slot(const std::vector<VarId>& vars) const {
        int best = -1;
        for (VarId v : vars) {
            const int s = var_slot_[static_cast<std::size_t>(v)];
            if (s < 0) continue;
            if (best < 0 || s < best) best = s;
        }
        return best;
    }

    NodeId learn(const std::vector<std::uint32_t>& rows, std::vector<VarId> vars) {
        if (rows.empty()) throw std::runtime_error("learn_spmn: empty row subset");
        if (vars.empty()) {
            Node unit;
            unit.type = NodeType::Product;
            return net_.add(std::move(unit));
        }
        if (vars.size() == 1) return leaf_for(rows, vars[0]);

        // Decisions are consumed in partial-order position before any split
        // or clustering may touch them.
        const int slot_idx = earliest_active_slot(vars);
        if (slot_idx >= 0 && order_.slots[static_cast<std::size_t>(slot_idx)].is_decision) {
            const VarId d = order_.slots[static_cast<std::size_t>(slot_idx)].decision_var;
            return learn_max(rows, vars, d);
        }

        if (auto partition = split_with_order(rows, vars)) {
            Node product;
            product.type = NodeType::Product;
            for (const std::vector<VarId>& group : *partition)
                product.children.push_back(learn(rows, group));
            return net_.add(std::move(product));
        }

        if (rows.size() >= static_cast<std::size_t>(hp_.effective_min_rows())) {
            // Cluster on the information set to be resolved next, so mixtures
            // land on behaviorally distinct states rather than on downstream
            // columns like rewards.
            std::vector<VarId> features;
            if (slot_idx >= 0) {
                for (VarId v : order_.slots[static_cast<std::size_t>(slot_idx)].info_vars) {
                    if (std::find(vars.begin(), vars.end(), v) != vars.end()) features.push_back(v);
                }
            }
            if (features.empty()) features = vars;
            auto clusters = cluster_rows(table_, rows, features, hp_.cluster_k,
                                         mix_seed(hp_.seed, cluster_call_counter_++),
                                         hp_.kmodes_restarts);
            if (clusters.size() >= 2) {
                Node sum;
                sum.type = NodeType::Sum;
                for (const std::vector<std::uint32_t>& cluster : clusters) {
                    sum.children.push_back(learn(cluster, vars));
                    sum.weights.push_back(static_cast<double>(cluster.size()) /
                                          static_cast<double>(rows.size()));
                }
                return net_.add(std::move(sum));
            }
        }

        // Too few rows or no usable clustering: fully factorized product.
        Node product;
        product.type = NodeType::Product;
        for (VarId v : vars) product.children.push_back(leaf_for(rows, v));
        return net_.add(std::move(product));
    }

    NodeId learn_max(const std::vector<std::uint32_t>& rows, const std::vector<VarId>& vars,
                     VarId d) {
        std::vector<VarId> rest;
        for (VarId v : vars)
            if (v != d) rest.push_back(v);
        std::map<int, std::vector<std::uint32_t>> by_value;
        for (std::uint32_t r : rows) by_value[table_.columns[static_cast<std::size_t>(d)][r]].push_back(r);
        if (by_value.empty()) throw std::runtime_error("learn_spmn: max node with no branches");
        Node max_node;
        max_node.type = NodeType::Max;
        max_node.var = d;
        for (auto& [value, subset] : by_value) {
            max_node.edge_labels.push_back(value);
            if (rest.empty()) {
                Node unit;
                unit.type = NodeType::Product;
                max_node.children.push_back(net_.add(std::move(unit)));
            } else {
                max_node.children.push_back(learn(subset, rest));
            }
        }
        return net_.add(std::move(max_node));
    }

    // Independence components with the order constraint: the earliest pending
    // decision and every variable of that slot or later must stay together.
    std::optional<std::vector<std::vector<VarId>>> split_with_order(
        const std::vector<std::uint32_t>& rows, const std::vector<VarId>& vars) {
        auto partition = independence_split(table_, rows, vars, hp_.indep_threshold);
        if (!partition) return std::nullopt;

        int first_decision_slot = -1;
        for (VarId v : vars) {
            const int s = var_slot_[static_cast<std::size_t>(v)];
            if (s < 0 || !order_.slots[static_cast<std::size_t>(s)].is_decision) continue;
            if (first_decision_slot < 0 || s < first_decision_slot) first_decision_slot = s;
        }
        if (first_decision_slot < 0) return partition;

        std::vector<std::vector<VarId>> result;
        std::vector<VarId> tail;
        for (std::vector<VarId>& group : *partition) {
            const bool in_tail = std::any_of(group.begin(), group.end(), [&](VarId v) {
                const int s = var_slot_[static_cast<std::size_t>(v)];
                return s >= first_decision_slot;
            });
            if (in_tail) {
                tail.insert(tail.end(), group.begin(), group.end());
            } else {
                result.push_back(std::move(group));
            }
        }
        if (!tail.empty()) {
            std::sort(tail.begin(), tail.end());
            result.push_back(std::move(tail));
        }
        if (result.size() < 2) return std::nullopt;
        return result;
    }

    const TwoStepTable& table_;
    const PartialOrder& order_;
    const LearnParams& hp_;
    Network net_;
    std::vector<int> var_slot_;
    std::uint64_t cluster_call_counter_ = 0;
};

}  // namespace

Network learn_spmn(const TwoStepTable& table, const PartialOrder& order, const LearnParams& hp) {
    if (hp.indep_threshold <= 0.0 || hp.indep_threshold >= 1.0)
        throw std::runtime_error("learn_spmn: indep_threshold out of range");
    if (hp.cluster_k < 2) throw std::runtime_error("learn_spmn: cluster_k must be >= 2");
    if (hp.laplace_alpha <= 0.0) throw std::runtime_error("learn_spmn: laplace_alpha must be > 0");
    return SpmnLearner(table, order, hp).run();
}

}  // namespace rspmn
