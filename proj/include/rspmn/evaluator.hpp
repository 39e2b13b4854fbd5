#pragma once

#include <map>

#include "rspmn/dataset.hpp"
#include "rspmn/evaluate.hpp"
#include "rspmn/network.hpp"

namespace rspmn {

struct MeuTable {
    int horizon = 0;
    // iterations[k] holds the per-interface-root values after pass k+1; pass 0
    // runs with latent inputs (1, 0). When evidence was supplied, the final
    // pass carries it.
    std::vector<std::vector<DualValue>> iterations;
    double meu = 0.0;
};

// Iterated Bellman-style template passes: each pass feeds the previous
// per-root utilities into the latent leaves; after `horizon` passes the top
// network combines the step-0 roots. Optional evidence conditions step 0.
MeuTable evaluate_meu(const RspmnModel& model, int horizon, const Evidence* evidence = nullptr);

// Greedy decision per decision variable at the given state: a top-down walk
// over the evidence-conditioned step-0 pass, argmaxing expected utility at max
// nodes and posterior path mass at sums. Throws when the state has no support.
std::map<VarId, int> extract_policy(const RspmnModel& model, const MeuTable& meu,
                                    const Evidence& state);

struct LogLikelihoodResult {
    double mean_ll = 0.0;
    std::size_t floored_records = 0;  // zero-likelihood records clamped to the floor
    std::size_t records = 0;
};

// Mean per-record log-likelihood under the iterated template chain. Utility
// columns contribute likelihood 1 (only states and decisions are evidence).
LogLikelihoodResult log_likelihood(const RspmnModel& model, const SequenceDataset& data);

inline constexpr std::size_t kUnfoldNodeGuard = 1000000;

// MEU through the explicitly unfolded network; the independent route that
// evaluate_meu must match. Throws when the materialization would exceed the
// node guard.
double meu_via_unfold(const RspmnModel& model, int horizon, const Evidence* evidence = nullptr);

// Evidence helper over a model's one-step variables, by name.
Evidence make_state_evidence(const RspmnModel& model,
                             const std::map<std::string, int>& assignment);

}  // namespace rspmn
