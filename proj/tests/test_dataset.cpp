#include <doctest.h>

#include <cstdio>
#include <fstream>

#include "rspmn/dataset.hpp"
#include "rspmn/envs.hpp"

using namespace rspmn;

namespace {

SequenceDataset tiny_dataset(std::vector<Episode> episodes) {
    SequenceDataset data;
    data.variables = {{"S", VarKind::State, 2, 0},
                      {"A", VarKind::Decision, 2, 1},
                      {"utility", VarKind::Utility, 0, -1}};
    Slot info;
    info.info_vars = {0};
    Slot decision;
    decision.is_decision = true;
    decision.decision_var = 1;
    data.partial_order.slots = {info, decision};
    data.episodes = std::move(episodes);
    return data;
}

StepTuple tup(int s, int a, double u) {
    StepTuple t;
    t.values = {s, a};
    t.utility = u;
    return t;
}

}  // namespace

TEST_CASE("wrapping pairs consecutive tuples per episode") {
    const SequenceDataset data = tiny_dataset({
        {tup(0, 0, 1.0), tup(1, 1, 2.0), tup(0, 0, 3.0)},
        {tup(1, 0, -1.0), tup(0, 1, 0.5), tup(1, 0, 0.0)},
    });
    const TwoStepTable table = wrap_two_step(data);
    CHECK(table.rows == 4);  // (3 - 1) per episode
    CHECK(table.column_count() == 6);
    CHECK(table.skipped_short_episodes == 0);
}

TEST_CASE("a single pair wraps to one row holding the concatenation") {
    const SequenceDataset data = tiny_dataset({{tup(1, 0, -2.0), tup(0, 1, 5.0)}});
    const TwoStepTable table = wrap_two_step(data);
    REQUIRE(table.rows == 1);
    CHECK(table.columns[0][0] == 1);  // S@0
    CHECK(table.columns[1][0] == 0);  // A@0
    CHECK(table.columns[3][0] == 0);  // S@1
    CHECK(table.columns[4][0] == 1);  // A@1
    CHECK(table.utility_values[2][static_cast<std::size_t>(table.columns[2][0])] == -2.0);
    CHECK(table.utility_values[5][static_cast<std::size_t>(table.columns[5][0])] == 5.0);
}

TEST_CASE("length-one episodes are skipped with a counter") {
    const SequenceDataset data = tiny_dataset({
        {tup(0, 0, 1.0)},
        {tup(0, 0, 1.0), tup(1, 1, 2.0)},
    });
    const TwoStepTable table = wrap_two_step(data);
    CHECK(table.rows == 1);
    CHECK(table.skipped_short_episodes == 1);
}

TEST_CASE("wrapped row count on a generated grid dataset is (T-1) * episodes") {
    const GridSpec spec = paper_grid_2x2();
    const SequenceDataset data = generate_dataset(spec, 100, 3);
    const TwoStepTable table = wrap_two_step(data);
    CHECK(table.rows == static_cast<std::size_t>(100 * (spec.horizon - 1)));
}

TEST_CASE("utility bucketization caps distinct codes and keeps exact small sets") {
    SequenceDataset data = tiny_dataset({});
    Episode episode;
    for (int i = 0; i < 200; ++i) episode.push_back(tup(i % 2, i % 2, static_cast<double>(i) / 7.0));
    data.episodes = {episode};
    const TwoStepTable capped = wrap_two_step(data, 16);
    CHECK(capped.utility_values[2].size() <= 16);

    const TwoStepTable exact = wrap_two_step(data, 1024);
    // 199 distinct utilities in the step-0 column
    CHECK(exact.utility_values[2].size() == 199);
}

TEST_CASE("two-step schema duplicates variables and slots with an offset") {
    const SequenceDataset data = tiny_dataset({});
    const auto vars = two_step_variables(data.variables);
    REQUIRE(vars.size() == 6);
    CHECK(vars[0].name == "S@0");
    CHECK(vars[3].name == "S@1");
    const PartialOrder order = two_step_order(data.partial_order, 3);
    REQUIRE(order.slots.size() == 4);
    CHECK(order.slots[1].decision_var == 1);
    CHECK(order.slots[3].decision_var == 4);
}

TEST_CASE("csv round trip preserves episodes and metadata") {
    const GridSpec spec = paper_grid_2x2();
    const SequenceDataset data = generate_dataset(spec, 25, 9);
    const std::string csv = "test_dataset_roundtrip.csv";
    const std::string order = "test_dataset_roundtrip_order.json";
    save_dataset_csv(data, csv);
    save_order_file(data, order);
    const SequenceDataset back = load_dataset(csv, order);
    REQUIRE(back.episodes.size() == data.episodes.size());
    for (std::size_t e = 0; e < data.episodes.size(); ++e) {
        REQUIRE(back.episodes[e].size() == data.episodes[e].size());
        for (std::size_t t = 0; t < data.episodes[e].size(); ++t) {
            CHECK(back.episodes[e][t].values == data.episodes[e][t].values);
            CHECK(back.episodes[e][t].utility == data.episodes[e][t].utility);
        }
    }
    REQUIRE(back.variables.size() == data.variables.size());
    for (std::size_t v = 0; v < data.variables.size(); ++v) {
        CHECK(back.variables[v].name == data.variables[v].name);
        CHECK(back.variables[v].kind == data.variables[v].kind);
    }
    CHECK(back.partial_order == data.partial_order);
    std::remove(csv.c_str());
    std::remove(order.c_str());
}

TEST_CASE("dataset loader rejects unsorted rows and multiple utility columns") {
    {
        std::ofstream out("bad_rows.csv");
        out << "episode,step,S,A,utility\n0,1,0,0,1.0\n0,0,0,0,1.0\n";
    }
    {
        std::ofstream out("bad_rows_order.json");
        out << R"([{"info":["S"]},{"decision":"A"}])";
    }
    CHECK_THROWS(load_dataset("bad_rows.csv", "bad_rows_order.json"));
    std::remove("bad_rows.csv");
    std::remove("bad_rows_order.json");
}
