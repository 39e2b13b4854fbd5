#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

namespace rspmn {

using VarId = std::int32_t;
using NodeId = std::int32_t;

enum class VarKind { State, Decision, Utility };

// One variable of a single time step. `slot` is the index of the partial-order
// slot the variable occupies (-1 for utility variables, which are unordered).
struct VariableMeta {
    std::string name;
    VarKind kind = VarKind::State;
    int cardinality = 0;  // 0 for utility variables
    int slot = -1;

    bool operator==(const VariableMeta&) const = default;
};

// Alternating information sets and decision slots over one or two steps.
struct Slot {
    bool is_decision = false;
    std::vector<VarId> info_vars;  // information set, possibly empty
    VarId decision_var = -1;

    bool operator==(const Slot&) const = default;
};

struct PartialOrder {
    std::vector<Slot> slots;

    bool operator==(const PartialOrder&) const = default;
};

// (likelihood, expected utility) pair propagated in every bottom-up pass.
// Convention: likelihood 0 forces eu to 0 so dead branches stay inert.
struct DualValue {
    double likelihood = 0.0;
    double eu = 0.0;
};

inline DualValue make_dual(double likelihood, double eu) {
    if (likelihood == 0.0) return {0.0, 0.0};
    return {likelihood, eu};
}

// Sorted set of variable ids. Scopes are tiny (tens of entries at most),
// so a flat sorted vector beats node-based sets here.
class VarSet {
  public:
    VarSet() = default;
    explicit VarSet(std::vector<VarId> ids) : ids_(std::move(ids)) {
        std::sort(ids_.begin(), ids_.end());
        ids_.erase(std::unique(ids_.begin(), ids_.end()), ids_.end());
    }

    static VarSet single(VarId v) { return VarSet(std::vector<VarId>{v}); }

    void insert(VarId v) {
        auto it = std::lower_bound(ids_.begin(), ids_.end(), v);
        if (it == ids_.end() || *it != v) ids_.insert(it, v);
    }

    void union_with(const VarSet& other) {
        std::vector<VarId> merged;
        merged.reserve(ids_.size() + other.ids_.size());
        std::set_union(ids_.begin(), ids_.end(), other.ids_.begin(), other.ids_.end(),
                       std::back_inserter(merged));
        ids_ = std::move(merged);
    }

    bool intersects(const VarSet& other) const {
        auto a = ids_.begin();
        auto b = other.ids_.begin();
        while (a != ids_.end() && b != other.ids_.end()) {
            if (*a == *b) return true;
            if (*a < *b) ++a; else ++b;
        }
        return false;
    }

    bool contains(VarId v) const {
        return std::binary_search(ids_.begin(), ids_.end(), v);
    }

    bool is_subset_of(const VarSet& other) const {
        return std::includes(other.ids_.begin(), other.ids_.end(), ids_.begin(), ids_.end());
    }

    bool empty() const { return ids_.empty(); }
    std::size_t size() const { return ids_.size(); }
    const std::vector<VarId>& ids() const { return ids_; }

    bool operator==(const VarSet&) const = default;

  private:
    std::vector<VarId> ids_;
};

}  // namespace rspmn
