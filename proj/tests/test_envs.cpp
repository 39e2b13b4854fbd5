#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>

#include "rspmn/dataset.hpp"
#include "rspmn/envs.hpp"

using namespace rspmn;

TEST_CASE("paper grid mdp has deterministic transitions with reward on entry") {
    const GridSpec spec = paper_grid_2x2();
    const Mdp mdp = grid_to_mdp(spec);
    CHECK(mdp.num_states == 4);
    // (0,0) --right--> (1,0): step cost plus the penalty on entering.
    const int s00 = spec.cell_index({0, 0});
    const auto& outcomes = mdp.transitions[static_cast<std::size_t>(s00)][kRight];
    REQUIRE(outcomes.size() == 1);
    CHECK(std::get<0>(outcomes[0]) == spec.cell_index({1, 0}));
    CHECK(std::get<1>(outcomes[0]) == doctest::Approx(1.0));
    CHECK(std::get<2>(outcomes[0]) == doctest::Approx(-11.0));
    // Deterministic grid: every probability is exactly one.
    for (int s = 0; s < mdp.num_states; ++s)
        for (int a = 0; a < mdp.num_actions; ++a)
            for (const auto& [sn, p, r] : mdp.transitions[static_cast<std::size_t>(s)][static_cast<std::size_t>(a)])
                CHECK(p == doctest::Approx(1.0));
}

TEST_CASE("transition probabilities sum to one, slippery included") {
    GridSpec spec = paper_grid_2x2();
    spec.slip_prob = 0.2;
    const Mdp mdp = grid_to_mdp(spec);
    for (int s = 0; s < mdp.num_states; ++s) {
        for (int a = 0; a < mdp.num_actions; ++a) {
            double total = 0.0;
            for (const auto& [sn, p, r] : mdp.transitions[static_cast<std::size_t>(s)][static_cast<std::size_t>(a)])
                total += p;
            CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
        }
    }
}

TEST_CASE("value iteration on the paper grid reaches 8 from the start") {
    const GridSpec spec = paper_grid_2x2();
    const Mdp mdp = grid_to_mdp(spec);
    const ValueIterationResult vi = value_iteration(mdp, 4);
    CHECK(vi.values[static_cast<std::size_t>(mdp.start_state)] == doctest::Approx(8.0));
    // Optimal first move avoids the penalty cell.
    CHECK(vi.policy[static_cast<std::size_t>(mdp.start_state)] == kDown);
    // Horizon zero means zero value.
    const ValueIterationResult zero = value_iteration(mdp, 0);
    for (double v : zero.values) CHECK(v == 0.0);
    // The absorbing goal is worth nothing at any horizon.
    for (int h = 1; h <= 6; ++h)
        CHECK(value_iteration(mdp, h).values[static_cast<std::size_t>(spec.cell_index(spec.goal))] ==
              doctest::Approx(0.0));
}

TEST_CASE("value iteration agrees with exhaustive open-loop plans on deterministic grids") {
    GridSpec spec;
    spec.width = 3;
    spec.height = 3;
    spec.start = {0, 0};
    spec.goal = {2, 2};
    spec.goal_reward = 10.0;
    spec.penalties = {{{1, 1}, -10.0}};
    spec.step_cost = -1.0;
    spec.horizon = 4;
    const Mdp mdp = grid_to_mdp(spec);
    const int horizon = 4;
    const ValueIterationResult vi = value_iteration(mdp, horizon);

    // Deterministic world: closed-loop and open-loop optima coincide, so the
    // best of the 5^4 action sequences is an independent oracle.
    auto simulate_plan = [&](int start, const std::vector<int>& plan) {
        int s = start;
        double total = 0.0;
        for (int a : plan) {
            const auto& outcomes = mdp.transitions[static_cast<std::size_t>(s)][static_cast<std::size_t>(a)];
            REQUIRE(outcomes.size() == 1);
            total += std::get<2>(outcomes[0]);
            s = std::get<0>(outcomes[0]);
        }
        return total;
    };
    for (int start = 0; start < mdp.num_states; ++start) {
        double best = -1e300;
        std::vector<int> plan(static_cast<std::size_t>(horizon), 0);
        for (int code = 0; code < 5 * 5 * 5 * 5; ++code) {
            int c = code;
            for (int i = 0; i < horizon; ++i) {
                plan[static_cast<std::size_t>(i)] = c % 5;
                c /= 5;
            }
            best = std::max(best, simulate_plan(start, plan));
        }
        CHECK(vi.values[static_cast<std::size_t>(start)] == doctest::Approx(best));
    }
}

TEST_CASE("datasets are deterministic per seed and byte-identical on disk") {
    const GridSpec spec = paper_grid_2x2();
    const SequenceDataset a = generate_dataset(spec, 50, 777);
    const SequenceDataset b = generate_dataset(spec, 50, 777);
    REQUIRE(a.episodes.size() == b.episodes.size());
    save_dataset_csv(a, "det_a.csv");
    save_dataset_csv(b, "det_b.csv");
    std::ifstream fa("det_a.csv"), fb("det_b.csv");
    const std::string ca((std::istreambuf_iterator<char>(fa)), std::istreambuf_iterator<char>());
    const std::string cb((std::istreambuf_iterator<char>(fb)), std::istreambuf_iterator<char>());
    CHECK(ca == cb);
    std::remove("det_a.csv");
    std::remove("det_b.csv");

    const SequenceDataset c = generate_dataset(spec, 50, 778);
    bool any_difference = false;
    for (std::size_t e = 0; e < c.episodes.size(); ++e)
        if (!(c.episodes[e] == a.episodes[e])) any_difference = true;
    CHECK(any_difference);
}

TEST_CASE("episodes run to the horizon and stay absorbed after a terminal") {
    const GridSpec spec = paper_grid_2x2();
    const SequenceDataset data = generate_dataset(spec, 400, 42);
    for (const Episode& episode : data.episodes) {
        REQUIRE(episode.size() == static_cast<std::size_t>(spec.horizon));
        bool absorbed = false;
        for (const StepTuple& tup : episode) {
            const Cell c{tup.values[0], tup.values[1]};
            if (absorbed) {
                CHECK(spec.is_terminal(c));
                CHECK(tup.values[2] == kNoop);
                CHECK(tup.utility == 0.0);
            }
            if (spec.is_terminal(c)) absorbed = true;
        }
    }
}

TEST_CASE("random actions are uniform within three-sigma binomial bounds") {
    const GridSpec spec = paper_grid_2x2();
    const SequenceDataset data = generate_dataset(spec, 4000, 1);
    std::vector<int> counts(kNumActions, 0);
    int total = 0;
    for (const Episode& episode : data.episodes) {
        // Only the first step is guaranteed non-terminal and uniformly random.
        const StepTuple& tup = episode[0];
        ++counts[static_cast<std::size_t>(tup.values[2])];
        ++total;
    }
    const double p = 1.0 / kNumActions;
    const double sigma = std::sqrt(total * p * (1 - p));
    for (int a = 0; a < kNumActions; ++a)
        CHECK(std::fabs(counts[static_cast<std::size_t>(a)] - total * p) <= 3.0 * sigma);
}

TEST_CASE("rolling out the oracle policy on the deterministic grid earns its value") {
    const GridSpec spec = paper_grid_2x2();
    const Mdp mdp = grid_to_mdp(spec);
    const ValueIterationResult vi = value_iteration(mdp, spec.horizon);
    const double reward = rollout_policy(
        spec, [&](Cell c) { return vi.policy[static_cast<std::size_t>(spec.cell_index(c))]; }, 50, 3);
    CHECK(reward == doctest::Approx(8.0));

    // A uniformly random policy does strictly worse in expectation.
    std::mt19937_64 rng(5);
    std::uniform_int_distribution<int> pick(0, kNumActions - 1);
    const double random_reward =
        rollout_policy(spec, [&](Cell) { return pick(rng); }, 10000, 5);
    CHECK(random_reward < reward);
}

TEST_CASE("policy deviation arithmetic") {
    CHECK(policy_deviation({1, 2, 3, 4}, {1, 2, 3, 4}) == doctest::Approx(0.0));
    CHECK(policy_deviation({1, 2, 3, 4}, {1, 2, 3, 0}) == doctest::Approx(25.0));
    const std::vector<bool> mask{true, false, true, false};
    CHECK(policy_deviation({1, 2, 3, 4}, {0, 2, 3, 4}, &mask) == doctest::Approx(50.0));
}

TEST_CASE("grid specs survive a file round trip and validate their fields") {
    GridSpec spec = paper_grid_2x2();
    spec.slip_prob = 0.1;
    save_grid_spec(spec, "grid_roundtrip.json");
    const GridSpec back = load_grid_spec("grid_roundtrip.json");
    CHECK(back.width == spec.width);
    CHECK(back.goal_reward == spec.goal_reward);
    CHECK(back.slip_prob == doctest::Approx(spec.slip_prob));
    CHECK(back.penalties.size() == 1);
    std::remove("grid_roundtrip.json");

    GridSpec bad = paper_grid_2x2();
    bad.start = bad.goal;
    CHECK_THROWS(bad.validate());
    bad = paper_grid_2x2();
    bad.slip_prob = 1.0;
    CHECK_THROWS(bad.validate());
}
