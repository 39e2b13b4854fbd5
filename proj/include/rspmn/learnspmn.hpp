#pragma once

#include <cstdint>
#include <optional>

#include "rspmn/dataset.hpp"
#include "rspmn/network.hpp"

namespace rspmn {

struct LearnParams {
    double indep_threshold = 0.001;  // G-test p-value below this marks dependence
    int cluster_k = 2;               // binary splits compose
    double laplace_alpha = 1.0;      // smoothing for categorical leaves
    int min_rows = -1;               // default 2 * cluster_k; below it, factorize
    std::uint64_t seed = 42;
    int kmodes_restarts = 3;
    int max_utility_buckets = 64;

    int effective_min_rows() const { return min_rows > 0 ? min_rows : 2 * cluster_k; }
};

// Upper-tail p-value of the chi-square distribution (regularized upper
// incomplete gamma Q(df/2, x/2)).
double chi_square_sf(double x, int df);

// G-test of independence between two coded columns over a row subset.
double g_test_p_value(const std::vector<int>& col_a, const std::vector<int>& col_b,
                      const std::vector<std::uint32_t>& rows, int card_a, int card_b);

// Dependency-graph components: an edge joins variables whose pairwise G-test
// rejects independence at `threshold`. Returns nullopt when everything stays
// connected (no split available).
std::optional<std::vector<std::vector<VarId>>> independence_split(
    const TwoStepTable& table, const std::vector<std::uint32_t>& rows,
    const std::vector<VarId>& vars, double threshold);

// Hard k-modes partition over the active columns. Deterministic given the
// seed; empty clusters are dropped; fewer distinct rows than k degrades to the
// distinct-row partition.
std::vector<std::vector<std::uint32_t>> cluster_rows(const TwoStepTable& table,
                                                     const std::vector<std::uint32_t>& rows,
                                                     const std::vector<VarId>& vars, int k,
                                                     std::uint64_t seed, int restarts = 3);

// LearnSPMN over a wrapped two-step table: decisions become max nodes in
// partial-order position, independent variable groups become products, row
// clusters become sums, and leaves carry Laplace-smoothed empirical
// distributions (utility columns become frequency-weighted sums of constants).
Network learn_spmn(const TwoStepTable& table, const PartialOrder& order, const LearnParams& hp);

}  // namespace rspmn
