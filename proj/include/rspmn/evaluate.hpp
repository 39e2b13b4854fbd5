#pragma once

#include <cmath>
#include <limits>

#include "rspmn/network.hpp"

namespace rspmn {

enum class EvalMode {
    Likelihood,  // max nodes gate on observed decisions, or sum all branches
    Meu          // max nodes pick the child with the highest expected utility
};

// Partial assignment over the network's variable universe. NaN = unobserved.
// Categorical values are stored as exact small integers; utility evidence is
// the observed reward (matched against utility leaf constants).
class Evidence {
  public:
    Evidence() = default;
    explicit Evidence(int num_vars)
        : values_(static_cast<std::size_t>(num_vars),
                  std::numeric_limits<double>::quiet_NaN()) {}

    void set(VarId v, double value) { values_.at(static_cast<std::size_t>(v)) = value; }
    void clear(VarId v) {
        values_.at(static_cast<std::size_t>(v)) = std::numeric_limits<double>::quiet_NaN();
    }
    bool observed(VarId v) const {
        return static_cast<std::size_t>(v) < values_.size() &&
               !std::isnan(values_[static_cast<std::size_t>(v)]);
    }
    double get(VarId v) const { return values_[static_cast<std::size_t>(v)]; }
    int size() const { return static_cast<int>(values_.size()); }

  private:
    std::vector<double> values_;
};

struct LatentInputs {
    std::vector<DualValue> values;  // indexed by interface_index
    bool allow_default = true;      // absent index evaluates to (1, 0)
};

struct EvalResult {
    std::vector<DualValue> root_values;
    std::size_t nodes_visited = 0;
};

// Single bottom-up pass; computes the topological order on the fly. For hot
// loops use NetworkEvaluator, which reuses the order and the value buffer.
EvalResult evaluate_bottom_up(const Network& net, const Evidence& evidence,
                              const LatentInputs& latent, EvalMode mode,
                              std::vector<DualValue>* node_table = nullptr);

class NetworkEvaluator {
  public:
    explicit NetworkEvaluator(const Network& net);

    // Values land in `table` (indexed by node id); returns per-root values.
    EvalResult evaluate(const Evidence& evidence, const LatentInputs& latent, EvalMode mode,
                        std::vector<DualValue>& table) const;

    const Network& network() const { return *net_; }

  private:
    const Network* net_;
    std::vector<NodeId> order_;
};

// Tolerance for matching observed rewards against utility leaf constants.
inline constexpr double kUtilityMatchEps = 1e-9;

}  // namespace rspmn
