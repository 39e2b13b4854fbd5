#include <doctest.h>

#include <random>

#include "rspmn/validity.hpp"
#include "test_support.hpp"

using namespace rspmn;
using namespace rspmn::testing;

TEST_CASE("sum with unequal child scopes fails completeness") {
    Network net;
    net.num_vars = 2;
    const NodeId a = add_leaf(net, 0, {0.5, 0.5});
    const NodeId b = add_leaf(net, 0, {0.5, 0.5});
    const NodeId c = add_leaf(net, 1, {0.5, 0.5});
    const NodeId wide = add_product(net, {b, c});
    const NodeId s = add_sum(net, {a, wide}, {0.5, 0.5});
    net.roots = {s};
    const ValidityReport report = check_spmn_valid(net);
    CHECK_FALSE(report.sum_complete.pass);
    CHECK(report.sum_complete.offenders == std::vector<NodeId>{s});
}

TEST_CASE("product repeating a variable fails decomposability") {
    Network net;
    net.num_vars = 1;
    const NodeId a = add_leaf(net, 0, {0.5, 0.5});
    const NodeId b = add_leaf(net, 0, {0.5, 0.5});
    const NodeId p = add_product(net, {a, b});
    net.roots = {p};
    const ValidityReport report = check_spmn_valid(net);
    CHECK_FALSE(report.decomposable.pass);
    CHECK(report.decomposable.offenders == std::vector<NodeId>{p});
}

TEST_CASE("max with unequal child scopes fails max-completeness") {
    Network net;
    net.num_vars = 3;
    const NodeId a = add_leaf(net, 1, {0.5, 0.5});
    const NodeId b = add_leaf(net, 2, {0.5, 0.5});
    net.roots = {add_max(net, 0, {a, b}, {0, 1})};
    CHECK_FALSE(check_spmn_valid(net).max_complete.pass);
}

TEST_CASE("repeated max for one decision on a path fails max-uniqueness") {
    Network net;
    net.num_vars = 2;
    const NodeId u0 = add_utility(net, 1, 1.0);
    const NodeId u1 = add_utility(net, 1, 2.0);
    const NodeId inner = add_max(net, 0, {u0, u1}, {0, 1});
    const NodeId u2 = add_utility(net, 1, 0.0);
    net.roots = {add_max(net, 0, {inner, u2}, {0, 1})};
    CHECK_FALSE(check_spmn_valid(net).max_unique.pass);
}

TEST_CASE("unnormalized sum weights fail the structural check") {
    Network net;
    net.num_vars = 1;
    const NodeId a = add_leaf(net, 0, {0.5, 0.5});
    const NodeId b = add_leaf(net, 0, {0.5, 0.5});
    net.roots = {add_sum(net, {a, b}, {0.6, 0.6})};
    CHECK_FALSE(check_spmn_valid(net).structure_ok.pass);
}

TEST_CASE("reachability formulation of max-uniqueness matches path enumeration") {
    std::mt19937_64 rng(11);
    std::uniform_int_distribution<int> n_vars_dist(1, 2);
    std::uniform_int_distribution<int> coin(0, 1);
    int disagreements = 0;
    for (int trial = 0; trial < 300; ++trial) {
        // Random small DAGs of max/product nodes over utility leaves; roughly
        // half violate uniqueness.
        Network net;
        net.num_vars = 3;
        const int n_decisions = n_vars_dist(rng);
        std::vector<NodeId> pool;
        for (int i = 0; i < 3; ++i) pool.push_back(add_utility(net, 2, static_cast<double>(i)));
        std::uniform_int_distribution<int> pick_decision(0, n_decisions - 1);
        for (int layer = 0; layer < 3; ++layer) {
            std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
            const NodeId a = pool[pick(rng)];
            const NodeId b = pool[pick(rng)];
            if (coin(rng)) {
                pool.push_back(add_max(net, pick_decision(rng), {a, b}, {0, 1}));
            } else {
                pool.push_back(a == b ? add_product(net, {a}) : add_product(net, {a, b}));
            }
        }
        net.roots = {pool.back()};
        const bool by_reachability = check_spmn_valid(net).max_unique.pass;
        const bool by_paths = max_unique_by_paths(net);
        if (by_reachability != by_paths) ++disagreements;
    }
    CHECK(disagreements == 0);
}

TEST_CASE("initial template from the fuzzer is sound and unfolds validly") {
    std::mt19937_64 rng(23);
    for (int trial = 0; trial < 40; ++trial) {
        const RspmnModel model = fuzz_sound_model(rng);
        CHECK(check_template_sound(model.temp).all_pass());
        CHECK(check_top_valid(model.top).all_pass());
        const Theorem1Result theorem = verify_theorem1(model, 5);
        CHECK(theorem.all_pass);
    }
}

TEST_CASE("template with one interface root missing a variable is unsound") {
    std::mt19937_64 rng(5);
    RspmnModel model = fuzz_sound_model(rng);
    // Rebuild one root without its first state leaf.
    Network& net = model.temp.network;
    const NodeId root = net.roots[0];
    Node replacement = net.at(root);
    REQUIRE(replacement.children.size() > 1);
    replacement.children.erase(replacement.children.begin());
    net.roots[0] = net.add(std::move(replacement));
    if (net.roots.size() == 1) {
        // A single root is trivially scope-equal; add back the original as a
        // second root so the comparison can fire.
        net.roots.push_back(root);
    }
    CHECK_FALSE(check_template_sound(model.temp).all_pass());
}

TEST_CASE("top network with unnormalized weights is invalid before unfolding") {
    std::mt19937_64 rng(6);
    RspmnModel model = fuzz_sound_model(rng);
    Network& top = model.top.network;
    top.at(top.roots[0]).weights[0] += 0.5;
    CHECK_FALSE(check_top_valid(model.top).all_pass());
    CHECK_THROWS(verify_theorem1(model, 1));
}

TEST_CASE("unfolding one copy of a grid-like model yields a valid SPMN") {
    std::mt19937_64 rng(9);
    const RspmnModel model = fuzz_sound_model(rng);
    const Network unfolded = unfold(model, 1);
    CHECK(check_spmn_valid(unfolded).all_pass());
    CHECK(unfolded.roots.size() == 1);
}

TEST_CASE("unfold re-indexes variables per step") {
    std::mt19937_64 rng(13);
    const RspmnModel model = fuzz_sound_model(rng);
    const int one_step = static_cast<int>(model.variables.size());
    const Network unfolded = unfold(model, 3);
    CHECK(unfolded.num_vars == 3 * one_step);
    const std::vector<VarSet> scope = scope_of(unfolded);
    const VarSet& root_scope = scope[static_cast<std::size_t>(unfolded.roots[0])];
    // Every variable of every step appears, re-indexed by its step offset.
    for (int step = 0; step < 3; ++step)
        for (VarId v = 0; v < one_step; ++v) CHECK(root_scope.contains(step * one_step + v));
}

TEST_CASE("unfold node count grows by one pruned-free template copy per step") {
    // Non-bottom copies contribute their non-latent nodes (latent leaves turn
    // into edges); the bottom copy is whatever one-step unfolding leaves after
    // pruning. Checking the growth law against direct unfolding pins both.
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 10; ++trial) {
        const RspmnModel model = fuzz_sound_model(rng);
        const Network& tnet = model.temp.network;
        const std::size_t per_copy = tnet.nodes.size() - model.temp.latent_leaves.size();

        // Interface roots no latent leaf maps to are only reachable in copy 0
        // (through the top network); later copies shed their subtrees.
        std::vector<bool> referenced(tnet.roots.size(), false);
        for (NodeId leaf : model.temp.latent_leaves)
            referenced[static_cast<std::size_t>(tnet.at(leaf).interface_index)] = true;
        const bool all_referenced =
            std::all_of(referenced.begin(), referenced.end(), [](bool b) { return b; });

        const std::size_t two = unfold(model, 2).nodes.size();
        const std::size_t three = unfold(model, 3).nodes.size();
        const std::size_t increment = three - two;
        CHECK(increment <= per_copy);
        if (all_referenced) CHECK(increment == per_copy);
        for (int steps = 4; steps <= 6; ++steps) {
            CHECK(unfold(model, steps).nodes.size() ==
                  two + static_cast<std::size_t>(steps - 2) * increment);
        }
    }
}

TEST_CASE("pruning the bottom copy is idempotent") {
    std::mt19937_64 rng(29);
    const RspmnModel model = fuzz_sound_model(rng);
    const Network once = unfold(model, 2);
    const Network again = compact(once);
    CHECK(once.nodes.size() == again.nodes.size());
    CHECK(once.roots == again.roots);
}

TEST_CASE("theorem 1 verification pinpoints a corrupted template") {
    std::mt19937_64 rng(31);
    RspmnModel model = fuzz_sound_model(rng);
    while (model.temp.network.roots.size() < 2) model = fuzz_sound_model(rng);
    // Corrupt: retarget every latent leaf of the first latent sum onto index 0
    // twice, breaking per-sum injectivity, or degrade a root's scope.
    Network& net = model.temp.network;
    const NodeId root = net.roots[0];
    Node replacement = net.at(root);
    replacement.children.erase(replacement.children.begin());
    net.roots[0] = net.add(std::move(replacement));
    const ValidityReport report = check_template_sound(model.temp);
    CHECK_FALSE(report.all_pass());
    CHECK_THROWS(verify_theorem1(model, 1));
}
