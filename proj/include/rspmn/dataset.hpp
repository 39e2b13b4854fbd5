#pragma once

#include <string>
#include <vector>

#include "rspmn/types.hpp"

namespace rspmn {

// One step of one episode: an integer per state/decision variable plus the
// observed utility, in variable order (utility excluded from `values`).
struct StepTuple {
    std::vector<int> values;
    double utility = 0.0;

    bool operator==(const StepTuple&) const = default;
};

using Episode = std::vector<StepTuple>;

struct SequenceDataset {
    std::vector<VariableMeta> variables;  // one-step schema; exactly one utility variable
    PartialOrder partial_order;           // one-step slots over the state/decision variables
    std::vector<Episode> episodes;

    VarId utility_var() const;
    int num_non_utility() const { return static_cast<int>(variables.size()) - 1; }
    std::size_t max_episode_length() const;
};

// Flat table over two consecutive steps. Columns follow the two-step variable
// layout: step-0 variables then step-1 variables (utility columns hold bucket
// codes; bucket_values maps codes back to reals, one table per utility column).
struct TwoStepTable {
    std::vector<VariableMeta> variables;       // 2 * (n + m + 1) entries
    PartialOrder order;                         // two-step slot list
    std::vector<std::vector<int>> columns;      // [variable][row]
    std::vector<std::vector<double>> utility_values;  // bucket code -> value, per variable
    std::size_t rows = 0;
    std::size_t skipped_short_episodes = 0;

    int column_count() const { return static_cast<int>(variables.size()); }
};

// Two-step schema derived by duplicating the one-step variables and slots;
// step-1 variable v maps to id v + (n + m + 1).
std::vector<VariableMeta> two_step_variables(const std::vector<VariableMeta>& one_step);
PartialOrder two_step_order(const PartialOrder& one_step, int one_step_var_count);

// One row per consecutive pair of tuples per episode, episode-major.
// Episodes of length 1 contribute nothing and bump skipped_short_episodes.
// Utility columns with more than max_utility_buckets distinct values are
// quantile-bucketized; below that the codes enumerate the exact values.
TwoStepTable wrap_two_step(const SequenceDataset& data, int max_utility_buckets = 64);

// CSV: header `episode,step,<vars...>,<utility>`, rows sorted by (episode, step).
void save_dataset_csv(const SequenceDataset& data, const std::string& path);

// Loads a CSV plus its one-step partial-order file (JSON array of
// {"info": [names...]} / {"decision": name}). Variable kinds come from the
// order file; the one header column not named there is the utility variable.
// Cardinalities are inferred as max observed value + 1 (at least 2).
SequenceDataset load_dataset(const std::string& csv_path, const std::string& order_path);

void save_order_file(const SequenceDataset& data, const std::string& path);

}  // namespace rspmn
