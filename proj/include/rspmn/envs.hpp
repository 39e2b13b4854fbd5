#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "rspmn/dataset.hpp"

namespace rspmn {

struct Cell {
    int x = 0;
    int y = 0;
    bool operator==(const Cell&) const = default;
};

// Actions, in tie-break order.
enum GridAction { kUp = 0, kDown = 1, kLeft = 2, kRight = 3, kNoop = 4 };
inline constexpr int kNumActions = 5;
const char* grid_action_name(int a);

struct GridSpec {
    int width = 2;
    int height = 2;
    Cell start{0, 0};
    Cell goal{1, 1};
    double goal_reward = 10.0;
    std::vector<std::pair<Cell, double>> penalties;
    double step_cost = -1.0;
    double slip_prob = 0.0;     // lateral slip, slip_prob/2 per side
    int horizon = 4;            // max steps per episode
    bool penalties_terminal = true;

    int cell_index(const Cell& c) const { return c.y * width + c.x; }
    Cell cell_at(int s) const { return {s % width, s / width}; }
    bool in_bounds(const Cell& c) const {
        return c.x >= 0 && c.x < width && c.y >= 0 && c.y < height;
    }
    bool is_terminal(const Cell& c) const;
    void validate() const;
};

// The paper-style 2x2 grid: start (0,0), penalty -10 at (1,0), goal +10 at
// (1,1), deterministic moves costing -1, horizon 4.
GridSpec paper_grid_2x2();

GridSpec load_grid_spec(const std::string& path);
void save_grid_spec(const GridSpec& spec, const std::string& path);

struct Mdp {
    int num_states = 0;
    int num_actions = 0;
    // transitions[s][a] lists (s', probability, reward-on-entry).
    std::vector<std::vector<std::vector<std::tuple<int, double, double>>>> transitions;
    std::vector<bool> terminal;
    int start_state = 0;
    int horizon = 0;
};

Mdp grid_to_mdp(const GridSpec& spec);

struct ValueIterationResult {
    std::vector<double> values;   // V_horizon per state
    std::vector<int> policy;      // greedy action at the final backup, ties lowest
};

ValueIterationResult value_iteration(const Mdp& mdp, int horizon);

// States reachable from the start under any action sequence.
std::vector<bool> reachable_states(const Mdp& mdp);

// Random-policy episodes. Uniform actions at non-terminal states; on entering
// a terminal the agent stays there under No-op with reward 0 until the
// horizon, so terminal states show up as ordinary states in the data. Each
// episode is seeded with base_seed xor episode index.
SequenceDataset generate_dataset(const GridSpec& spec, int episodes, std::uint64_t seed);

// Mean total reward of `episodes` simulations under a per-state policy.
double rollout_policy(const GridSpec& spec, const std::function<int(Cell)>& policy, int episodes,
                      std::uint64_t seed);

// Percentage of states (optionally masked) where the two policies disagree.
double policy_deviation(const std::vector<int>& policy_a, const std::vector<int>& policy_b,
                        const std::vector<bool>* mask = nullptr);

}  // namespace rspmn
