#pragma once

#include <cstdint>

#include "rspmn/dataset.hpp"
#include "rspmn/learnspmn.hpp"
#include "rspmn/network.hpp"

namespace rspmn {

// Strips every node whose scope lies inside the step-1 variable set from a
// two-step SPMN, leaving the one-step network. Sum subtrees that model only
// the next step disappear from their parents; product children are filtered
// individually. Throws when the root itself would go away.
Network extract_one_step(const Network& s2);

struct InterfaceDiscovery {
    TopNetwork top;      // uniform sum over one latent leaf per interface root
    Network ir_network;  // multi-rooted, roots are the interface-root products
};

// Walks the one-step network to its top-most full-scope product nodes and runs
// the interface-children recursion below each: a product without sum children
// contributes itself; a product with sum children contributes, per sum-child
// grandchild, the recursive sets augmented with the product's non-sum
// children. One fresh product per distinct set becomes an interface root.
InterfaceDiscovery discover_interface_roots(const Network& s1);

// Attaches a fresh latent-leaf sum at each bottom-most node reachable from
// every interface root: appended as an extra child on products, or wrapped
// around each leaf child of sums and max nodes.
TemplateNetwork build_initial_template(const Network& ir_network);

struct HardEmOptions {
    int epochs = 2;
    double early_stop_delta = 1e-6;  // stop when no weight moves more than this
    double count_smoothing = 0.0;    // added to every edge count before normalizing
    int threads = 1;
};

struct HardEmState {
    std::vector<std::vector<std::uint64_t>> edge_counts;  // per node, per child (sums only)
    std::vector<std::uint64_t> node_visits;
    std::vector<std::vector<DualValue>> last_record_lls;  // per-step interface-root values
    DualValue last_record_top{};                          // top-network root, the step "-1" value
};

struct HardEmEpochReport {
    double mean_ll = 0.0;               // sweep likelihood, utility evidence included
    std::size_t skipped_records = 0;    // zero-likelihood records
    std::size_t template_nodes = 0;     // after this epoch's pruning
    std::size_t pruned_latent_edges = 0;
    double max_weight_delta = 0.0;
    bool template_sound = false;
};

struct HardEmResult {
    RspmnModel model;
    std::vector<HardEmEpochReport> epochs;
    HardEmState state;                     // counts of the last executed epoch
    std::size_t conservation_violations = 0;
};

// Alternates a likelihood sweep from the last tuple back to the top network
// with a count-collecting top-down pass per record, then rewrites sum weights
// as edge frequencies and prunes zero-count latent leaves. The top network is
// traversed to pick the entry interface root but keeps its uniform weights.
HardEmResult hard_em_refine(const RspmnModel& initial, const SequenceDataset& data,
                            const HardEmOptions& opts);

struct LearnRspmnResult {
    RspmnModel initial_model;   // before hard-EM refinement
    RspmnModel model;
    Network two_step;           // the learned two-step SPMN
    HardEmResult em;
    double wrap_rows = 0.0;
    double initial_seconds = 0.0;  // wrap + structure + template construction
    double refine_seconds = 0.0;
};

// Full LearnRSPMN: wrap, learn the two-step SPMN, extract, discover interface
// roots, build the initial template, refine with hard EM.
LearnRspmnResult learn_rspmn(const SequenceDataset& data, const LearnParams& lp,
                             const HardEmOptions& em);

}  // namespace rspmn
