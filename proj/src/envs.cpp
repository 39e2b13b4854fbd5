#include "rspmn/envs.hpp"

#include <cmath>
#include <fstream>
#include <random>

#include <json.hpp>

namespace rspmn {

using nlohmann::json;

const char* grid_action_name(int a) {
    switch (a) {
        case kUp: return "up";
        case kDown: return "down";
        case kLeft: return "left";
        case kRight: return "right";
        case kNoop: return "noop";
    }
    return "?";
}

bool GridSpec::is_terminal(const Cell& c) const {
    if (c == goal) return true;
    if (!penalties_terminal) return false;
    for (const auto& [cell, reward] : penalties)
        if (cell == c) return true;
    return false;
}

void GridSpec::validate() const {
    if (width < 1 || height < 1) throw std::runtime_error("grid: empty board");
    if (!in_bounds(start) || !in_bounds(goal)) throw std::runtime_error("grid: cell out of bounds");
    for (const auto& [cell, reward] : penalties)
        if (!in_bounds(cell)) throw std::runtime_error("grid: penalty cell out of bounds");
    if (start == goal) throw std::runtime_error("grid: start equals goal");
    if (is_terminal(start)) throw std::runtime_error("grid: start is terminal");
    if (slip_prob < 0.0 || slip_prob >= 1.0) throw std::runtime_error("grid: slip_prob must be in [0,1)");
    if (horizon < 1) throw std::runtime_error("grid: horizon must be >= 1");
}

GridSpec paper_grid_2x2() {
    GridSpec spec;
    spec.width = 2;
    spec.height = 2;
    spec.start = {0, 0};
    spec.goal = {1, 1};
    spec.goal_reward = 10.0;
    spec.penalties = {{{1, 0}, -10.0}};
    spec.step_cost = -1.0;
    spec.slip_prob = 0.0;
    spec.horizon = 4;
    return spec;
}

GridSpec load_grid_spec(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read grid spec: " + path);
    json j;
    in >> j;
    GridSpec spec;
    spec.width = j.at("width").get<int>();
    spec.height = j.at("height").get<int>();
    spec.start = {j.at("start").at(0).get<int>(), j.at("start").at(1).get<int>()};
    spec.goal = {j.at("goal").at("cell").at(0).get<int>(), j.at("goal").at("cell").at(1).get<int>()};
    spec.goal_reward = j.at("goal").at("reward").get<double>();
    if (j.contains("penalties"))
        for (const json& p : j["penalties"])
            spec.penalties.push_back({{p.at("cell").at(0).get<int>(), p.at("cell").at(1).get<int>()},
                                      p.at("reward").get<double>()});
    spec.step_cost = j.at("step_cost").get<double>();
    spec.slip_prob = j.value("slip_prob", 0.0);
    spec.horizon = j.at("horizon").get<int>();
    spec.penalties_terminal = j.value("penalties_terminal", true);
    spec.validate();
    return spec;
}

void save_grid_spec(const GridSpec& spec, const std::string& path) {
    json j;
    j["width"] = spec.width;
    j["height"] = spec.height;
    j["start"] = {spec.start.x, spec.start.y};
    j["goal"] = {{"cell", {spec.goal.x, spec.goal.y}}, {"reward", spec.goal_reward}};
    json pens = json::array();
    for (const auto& [cell, reward] : spec.penalties)
        pens.push_back({{"cell", {cell.x, cell.y}}, {"reward", reward}});
    j["penalties"] = std::move(pens);
    j["step_cost"] = spec.step_cost;
    j["slip_prob"] = spec.slip_prob;
    j["horizon"] = spec.horizon;
    j["penalties_terminal"] = spec.penalties_terminal;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write grid spec: " + path);
    out << j.dump(2) << "\n";
}

namespace {

Cell apply_move(const GridSpec& spec, const Cell& c, int action) {
    Cell next = c;
    switch (action) {
        case kUp: next.y -= 1; break;
        case kDown: next.y += 1; break;
        case kLeft: next.x -= 1; break;
        case kRight: next.x += 1; break;
        case kNoop: break;
    }
    return spec.in_bounds(next) ? next : c;
}

double entry_bonus(const GridSpec& spec, const Cell& c) {
    if (c == spec.goal) return spec.goal_reward;
    for (const auto& [cell, reward] : spec.penalties)
        if (cell == c) return reward;
    return 0.0;
}

// Lateral slip directions for a cardinal move.
std::pair<int, int> lateral_of(int action) {
    if (action == kUp || action == kDown) return {kLeft, kRight};
    return {kUp, kDown};
}

}  // namespace

Mdp grid_to_mdp(const GridSpec& spec) {
    spec.validate();
    Mdp mdp;
    mdp.num_states = spec.width * spec.height;
    mdp.num_actions = kNumActions;
    mdp.start_state = spec.cell_index(spec.start);
    mdp.horizon = spec.horizon;
    mdp.terminal.assign(static_cast<std::size_t>(mdp.num_states), false);
    mdp.transitions.assign(static_cast<std::size_t>(mdp.num_states), {});
    for (int s = 0; s < mdp.num_states; ++s) {
        const Cell c = spec.cell_at(s);
        mdp.terminal[static_cast<std::size_t>(s)] = spec.is_terminal(c);
        auto& per_action = mdp.transitions[static_cast<std::size_t>(s)];
        per_action.assign(kNumActions, {});
        for (int a = 0; a < kNumActions; ++a) {
            auto& outcomes = per_action[static_cast<std::size_t>(a)];
            if (mdp.terminal[static_cast<std::size_t>(s)]) {
                outcomes.push_back({s, 1.0, 0.0});
                continue;
            }
            auto push = [&](int action, double prob) {
                const Cell next = apply_move(spec, c, action);
                const double reward = spec.step_cost + entry_bonus(spec, next);
                const int sn = spec.cell_index(next);
                for (auto& [existing, p, r] : outcomes) {
                    if (existing == sn && r == reward) {
                        p += prob;
                        return;
                    }
                }
                outcomes.push_back({sn, prob, reward});
            };
            if (a == kNoop || spec.slip_prob == 0.0) {
                push(a, 1.0);
            } else {
                const auto [lat_a, lat_b] = lateral_of(a);
                push(a, 1.0 - spec.slip_prob);
                push(lat_a, spec.slip_prob / 2.0);
                push(lat_b, spec.slip_prob / 2.0);
            }
        }
    }
    return mdp;
}

ValueIterationResult value_iteration(const Mdp& mdp, int horizon) {
    std::vector<double> values(static_cast<std::size_t>(mdp.num_states), 0.0);
    std::vector<int> policy(static_cast<std::size_t>(mdp.num_states), 0);
    for (int k = 0; k < horizon; ++k) {
        std::vector<double> next(static_cast<std::size_t>(mdp.num_states), 0.0);
        for (int s = 0; s < mdp.num_states; ++s) {
            double best = -std::numeric_limits<double>::infinity();
            int best_a = 0;
            for (int a = 0; a < mdp.num_actions; ++a) {
                double q = 0.0;
                for (const auto& [sn, p, r] : mdp.transitions[static_cast<std::size_t>(s)][static_cast<std::size_t>(a)])
                    q += p * (r + values[static_cast<std::size_t>(sn)]);
                if (q > best) {
                    best = q;
                    best_a = a;
                }
            }
            next[static_cast<std::size_t>(s)] = best;
            policy[static_cast<std::size_t>(s)] = best_a;
        }
        values = std::move(next);
    }
    return {std::move(values), std::move(policy)};
}

std::vector<bool> reachable_states(const Mdp& mdp) {
    std::vector<bool> seen(static_cast<std::size_t>(mdp.num_states), false);
    std::vector<int> stack{mdp.start_state};
    while (!stack.empty()) {
        const int s = stack.back();
        stack.pop_back();
        if (seen[static_cast<std::size_t>(s)]) continue;
        seen[static_cast<std::size_t>(s)] = true;
        if (mdp.terminal[static_cast<std::size_t>(s)]) continue;
        for (int a = 0; a < mdp.num_actions; ++a)
            for (const auto& [sn, p, r] : mdp.transitions[static_cast<std::size_t>(s)][static_cast<std::size_t>(a)])
                if (p > 0.0) stack.push_back(sn);
    }
    return seen;
}

namespace {

Cell sample_transition(const GridSpec& spec, const Cell& c, int action, std::mt19937_64& rng) {
    if (action == kNoop || spec.slip_prob == 0.0) return apply_move(spec, c, action);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const double u = unif(rng);
    const auto [lat_a, lat_b] = lateral_of(action);
    if (u < 1.0 - spec.slip_prob) return apply_move(spec, c, action);
    if (u < 1.0 - spec.slip_prob / 2.0) return apply_move(spec, c, lat_a);
    return apply_move(spec, c, lat_b);
}

}  // namespace

SequenceDataset generate_dataset(const GridSpec& spec, int episodes, std::uint64_t seed) {
    spec.validate();
    if (episodes < 1) throw std::runtime_error("generate_dataset: episodes must be >= 1");
    SequenceDataset data;
    data.variables = {
        {"X", VarKind::State, spec.width, 0},
        {"Y", VarKind::State, spec.height, 0},
        {"A", VarKind::Decision, kNumActions, 1},
        {"utility", VarKind::Utility, 0, -1},
    };
    Slot info0;
    info0.info_vars = {0, 1};
    Slot decision;
    decision.is_decision = true;
    decision.decision_var = 2;
    Slot info1;
    data.partial_order.slots = {info0, decision, info1};

    data.episodes.resize(static_cast<std::size_t>(episodes));
    for (int e = 0; e < episodes; ++e) {
        std::mt19937_64 rng(seed ^ static_cast<std::uint64_t>(e));
        std::uniform_int_distribution<int> pick_action(0, kNumActions - 1);
        Episode& episode = data.episodes[static_cast<std::size_t>(e)];
        episode.reserve(static_cast<std::size_t>(spec.horizon));
        Cell c = spec.start;
        for (int t = 0; t < spec.horizon; ++t) {
            StepTuple tup;
            if (spec.is_terminal(c)) {
                tup.values = {c.x, c.y, kNoop};
                tup.utility = 0.0;
            } else {
                const int a = pick_action(rng);
                const Cell next = sample_transition(spec, c, a, rng);
                tup.values = {c.x, c.y, a};
                tup.utility = spec.step_cost + entry_bonus(spec, next);
                c = next;
            }
            episode.push_back(std::move(tup));
        }
    }
    return data;
}

double rollout_policy(const GridSpec& spec, const std::function<int(Cell)>& policy, int episodes,
                      std::uint64_t seed) {
    spec.validate();
    double total = 0.0;
    for (int e = 0; e < episodes; ++e) {
        std::mt19937_64 rng(seed ^ static_cast<std::uint64_t>(e));
        Cell c = spec.start;
        for (int t = 0; t < spec.horizon; ++t) {
            if (spec.is_terminal(c)) break;
            const int a = policy(c);
            if (a < 0 || a >= kNumActions) throw std::runtime_error("rollout: policy returned bad action");
            const Cell next = sample_transition(spec, c, a, rng);
            total += spec.step_cost + entry_bonus(spec, next);
            c = next;
        }
    }
    return total / static_cast<double>(episodes);
}

double policy_deviation(const std::vector<int>& policy_a, const std::vector<int>& policy_b,
                        const std::vector<bool>* mask) {
    if (policy_a.size() != policy_b.size())
        throw std::runtime_error("policy_deviation: size mismatch");
    std::size_t considered = 0, differing = 0;
    for (std::size_t s = 0; s < policy_a.size(); ++s) {
        if (mask && !(*mask)[s]) continue;
        ++considered;
        if (policy_a[s] != policy_b[s]) ++differing;
    }
    if (considered == 0) return 0.0;
    return 100.0 * static_cast<double>(differing) / static_cast<double>(considered);
}

}  // namespace rspmn
