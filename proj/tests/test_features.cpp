#include <catch2/catch_amalgamated.hpp>

#include <string>
#include <vector>

#include "flucast/features.hpp"
#include "flucast/synth.hpp"

using namespace flucast;

namespace {

PanelDataset series_panel(const std::vector<std::vector<double>>& incidence,
                          std::vector<std::string> locations,
                          const std::vector<std::vector<double>>& queries = {},
                          std::vector<std::string> query_ids = {}) {
    PanelDataset p;
    IsoWeek w{2010, 1};
    for (std::size_t t = 0; t < incidence.size(); ++t) {
        p.weeks.push_back(format_iso_week(w));
        w = next_iso_week(w);
    }
    p.location_ids = std::move(locations);
    p.incidence = incidence;
    if (queries.empty())
        p.queries.assign(incidence.size(), {});
    else
        p.queries = queries;
    p.query_ids = std::move(query_ids);
    return p;
}

} // namespace

TEST_CASE("build_tabular AR lag layout") {
    auto panel = series_panel({{1.0}, {2.0}, {3.0}, {4.0}}, {"A"});
    ForecastTask task{1, "A", false};
    ModelHyperparams hyper;
    hyper.lookback_N = 2;

    auto dm = build_tabular(panel, task, hyper, TabularKind::AR, {"A"}, {});
    REQUIRE(dm.num_rows() == 2); // T - (N + h) + 1 = 4 - 3 + 1
    CHECK(dm.feature_names == std::vector<std::string>{"epi:A:lag1", "epi:A:lag2"});
    // row targeting week 3 (value 4): features [y_2, y_1] = [3, 2]
    CHECK(dm.targets[1] == 4.0);
    CHECK(dm.features[1] == std::vector<double>{3.0, 2.0});
}

TEST_CASE("build_tabular horizon shifts the lag window") {
    auto panel = series_panel({{1.0}, {2.0}, {3.0}, {4.0}}, {"A"});
    ForecastTask task{2, "A", false};
    ModelHyperparams hyper;
    hyper.lookback_N = 2;
    auto dm = build_tabular(panel, task, hyper, TabularKind::AR, {"A"}, {});
    REQUIRE(dm.num_rows() == 1);
    CHECK(dm.targets[0] == 4.0);
    CHECK(dm.features[0] == std::vector<double>{2.0, 1.0}); // [y_1, y_0]
}

TEST_CASE("build_tabular LR feature ordering over regions") {
    auto panel = series_panel({{1.0, 10.0}, {2.0, 20.0}, {3.0, 30.0}}, {"A", "B"});
    ForecastTask task{1, "A", false};
    ModelHyperparams hyper;
    hyper.lookback_N = 1;
    hyper.region_count_R = 2;
    auto dm = build_tabular(panel, task, hyper, TabularKind::LR, {"A", "B"}, {});
    CHECK(dm.feature_names == std::vector<std::string>{"epi:A:lag1", "epi:B:lag1"});
    CHECK(dm.features[0] == std::vector<double>{1.0, 10.0});
    CHECK(dm.targets[0] == 2.0);
}

TEST_CASE("LR with R=1 and regions=[target] equals AR") {
    SynthConfig cfg;
    cfg.weeks = 40;
    cfg.locations = 3;
    cfg.queries = 0;
    auto panel = synthesize_panel(cfg, 5);
    ForecastTask task{2, "loc01", false};
    ModelHyperparams hyper;
    hyper.lookback_N = 4;
    hyper.region_count_R = 1;
    auto ar = build_tabular(panel, task, hyper, TabularKind::AR, {}, {});
    auto lr = build_tabular(panel, task, hyper, TabularKind::LR, {"loc01"}, {});
    CHECK(ar.feature_names == lr.feature_names);
    CHECK(ar.features == lr.features);
    CHECK(ar.targets == lr.targets);
}

TEST_CASE("query features are synchronous with the target week") {
    auto panel = series_panel({{1.0}, {2.0}, {3.0}, {4.0}}, {"A"},
                              {{10.0}, {20.0}, {30.0}, {40.0}}, {"q"});
    ForecastTask task{2, "A", true};
    ModelHyperparams hyper;
    hyper.lookback_N = 1;
    auto dm = build_tabular(panel, task, hyper, TabularKind::AR, {}, {"q"});
    CHECK(dm.feature_names == std::vector<std::string>{"epi:A:lag1", "query:q"});
    // row targeting week 2: epi lag = y_0, query = q_2 (week t itself)
    CHECK(dm.features[0] == std::vector<double>{1.0, 30.0});
}

TEST_CASE("no leakage: epi features never touch weeks inside (t-h, t]") {
    // poison everything after the lag window with sentinels and check
    // they never appear among epi features
    const double sentinel = 1e9;
    for (std::size_t h : {1UL, 2UL, 4UL}) {
        std::vector<std::vector<double>> incidence;
        for (std::size_t t = 0; t < 16; ++t)
            incidence.push_back({static_cast<double>(t + 1)});
        auto panel = series_panel(incidence, {"A"});
        ModelHyperparams hyper;
        hyper.lookback_N = 3;
        ForecastTask task{h, "A", false};
        auto dm = build_tabular(panel, task, hyper, TabularKind::AR, {}, {});
        for (std::size_t i = 0; i < dm.num_rows(); ++i) {
            std::size_t t = dm.target_weeks[i];
            // rebuild with weeks in (t-h, t] poisoned
            auto poisoned = panel;
            for (std::size_t w = t - h + 1; w <= t; ++w)
                poisoned.incidence[w][0] = sentinel;
            auto dmp = build_tabular(poisoned, task, hyper, TabularKind::AR, {}, {});
            for (double v : dmp.features[i])
                CHECK(v != sentinel);
        }
    }
}

TEST_CASE("row count equals T_available - (N + h) + 1") {
    std::vector<std::vector<double>> incidence;
    for (std::size_t t = 0; t < 30; ++t)
        incidence.push_back({static_cast<double>(t)});
    auto panel = series_panel(incidence, {"A"});
    for (std::size_t n : {1UL, 4UL, 8UL})
        for (std::size_t h : {1UL, 2UL, 8UL}) {
            ModelHyperparams hyper;
            hyper.lookback_N = n;
            ForecastTask task{h, "A", false};
            auto dm = build_tabular(panel, task, hyper, TabularKind::AR, {}, {});
            CHECK(dm.num_rows() == 30 - (n + h) + 1);
        }
}

TEST_CASE("build_tabular errors on insufficient history") {
    auto panel = series_panel({{1.0}, {2.0}}, {"A"});
    ModelHyperparams hyper;
    hyper.lookback_N = 5;
    ForecastTask task{1, "A", false};
    CHECK_THROWS_AS(build_tabular(panel, task, hyper, TabularKind::AR, {}, {}), ModelError);
}

TEST_CASE("rank_regions puts the target first, exact copies next") {
    auto panel = series_panel(
        {{1.0, 1.0, 9.0}, {2.0, 2.0, 4.0}, {3.0, 3.0, 8.0}, {4.0, 4.0, 1.0}},
        {"X", "Y", "Z"});
    auto order = rank_regions(panel, "X", {0, 4});
    REQUIRE(order.size() == 3);
    CHECK(order[0] == "X");
    CHECK(order[1] == "Y"); // exact copy of X
    CHECK_THROWS_AS(rank_regions(panel, "missing", WeekInterval{0, 4}), DataError);

    auto solo = series_panel({{1.0}, {2.0}}, {"A"});
    CHECK(rank_regions(solo, "A", {0, 2}) == std::vector<std::string>{"A"});
}

TEST_CASE("rank_regions recovers planted ring neighbors") {
    SynthConfig cfg;
    cfg.weeks = 208;
    cfg.locations = 8;
    cfg.queries = 0;
    cfg.mixing = 0.6;
    cfg.noise = 0.01;
    cfg.peaks = 0;
    auto panel = synthesize_panel(cfg, 3);
    // under ring mixing, loc03's neighbors are loc02 and loc04; averaged
    // over a couple of seeds-independent targets both neighbors should sit
    // in the top half of the ranking
    auto order = rank_regions(panel, "loc03", {0, 208});
    auto pos = [&](const std::string& id) {
        for (std::size_t i = 0; i < order.size(); ++i)
            if (order[i] == id) return i;
        return order.size();
    };
    CHECK(pos("loc02") <= 4);
    CHECK(pos("loc04") <= 4);
}

TEST_CASE("build_sequences shapes and broadcast queries") {
    SynthConfig cfg;
    cfg.weeks = 30;
    cfg.locations = 2;
    cfg.queries = 12;
    auto panel = synthesize_panel(cfg, 9);

    ModelHyperparams hyper;
    hyper.lookback_N = 3;
    ForecastTask task{1, std::nullopt, false};
    auto sb = build_sequences(panel, task, hyper, {});
    REQUIRE(!sb.inputs.empty());
    CHECK(sb.inputs[0].size() == 3);
    CHECK(sb.inputs[0][0].size() == 2);
    CHECK(sb.targets[0].size() == 2);

    // with 10 queries, channels 2..11 are constant across steps
    std::vector<std::string> q10(panel.query_ids.begin(), panel.query_ids.begin() + 10);
    hyper.lookback_N = 5;
    auto sbq = build_sequences(panel, task, hyper, q10);
    CHECK(sbq.inputs[0][0].size() == 12);
    for (const auto& example : sbq.inputs)
        for (std::size_t s = 1; s < example.size(); ++s)
            for (std::size_t c = 2; c < 12; ++c)
                CHECK(example[s][c] == example[0][c]);
}

TEST_CASE("build_sequences horizon delay semantics") {
    std::vector<std::vector<double>> incidence;
    for (std::size_t t = 0; t < 20; ++t)
        incidence.push_back({static_cast<double>(t)});
    auto panel = series_panel(incidence, {"A"});
    ModelHyperparams hyper;
    hyper.lookback_N = 3;
    ForecastTask task{8, std::nullopt, false};
    auto sb = build_sequences(panel, task, hyper, {});
    for (std::size_t i = 0; i < sb.num_examples(); ++i) {
        std::size_t t = sb.target_weeks[i];
        // last step must be week t-8 (incidence values equal the week index)
        CHECK(sb.inputs[i].back()[0] == static_cast<double>(t - 8));
    }
}
