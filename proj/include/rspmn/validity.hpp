#pragma once

#include <string>

#include "rspmn/network.hpp"

namespace rspmn {

struct ConditionResult {
    bool pass = true;
    std::vector<NodeId> offenders;

    void fail(NodeId id) {
        pass = false;
        offenders.push_back(id);
    }
};

struct ValidityReport {
    ConditionResult structure_ok;     // ids in range, acyclic, weights/probs normalized
    ConditionResult sum_complete;     // children of a sum share one scope
    ConditionResult decomposable;     // product children have disjoint scopes
    ConditionResult max_complete;     // children of a max share one scope
    ConditionResult max_unique;       // one max per decision variable per path
    ConditionResult template_sound;   // equal interface-root scopes + latent linking
    ConditionResult top_valid;        // top restricted to sum/product/latent, valid

    bool all_pass() const {
        return structure_ok.pass && sum_complete.pass && decomposable.pass &&
               max_complete.pass && max_unique.pass && template_sound.pass && top_valid.pass;
    }
    std::string to_string() const;
};

// Defs 2-5 over a single-rooted SPMN. Latent leaves, if any, use the
// per-index synthetic scope symbols.
ValidityReport check_spmn_valid(const Network& net);

// Template soundness: Defs 2-5 with every interface root treated as a root,
// all latent leaves collapsed onto one synthetic symbol (the quotient induced
// by the latent scope-linking rule), equal scopes across Ir, and a
// well-formed leaf-to-root mapping (per-sum injectivity of interface indices).
ValidityReport check_template_sound(const TemplateNetwork& temp);

// Top network: only sum/product/latent nodes, single root, sums complete and
// products decomposable under the same latent quotient.
ValidityReport check_top_valid(const TopNetwork& top);

// Materializes `steps` template copies capped by the top network. Latent
// leaves of copy t become edges to the mapped interface root of copy t+1; the
// bottom copy's latent leaves are removed with childless sum/product parents
// pruned transitively. Variables are re-indexed per step: one-step variable v
// at copy t maps to t * V + v.
Network unfold(const RspmnModel& model, int steps);

struct Theorem1Result {
    std::vector<bool> pass_per_step;  // index 0 = one template copy
    bool all_pass = true;
};

// Empirical check of the validity guarantee: a sound template capped by a
// valid top network must stay a valid SPMN no matter how many copies are
// unfolded. Materializes every horizon in 1..max_steps and checks each.
Theorem1Result verify_theorem1(const RspmnModel& model, int max_steps);

}  // namespace rspmn
