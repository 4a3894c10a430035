#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "flucast/harness.hpp"
#include "flucast/synth.hpp"

using namespace flucast;

namespace {

// noiseless seasonal panel with period 4: AR can nail it, persistence at
// h != multiple-of-4 cannot
PanelDataset periodic_panel(std::size_t weeks) {
    PanelDataset p;
    IsoWeek w{2012, 1};
    for (std::size_t t = 0; t < weeks; ++t) {
        p.weeks.push_back(format_iso_week(w));
        w = next_iso_week(w);
        double v = 10.0 + 5.0 * std::sin(2.0 * 3.14159265358979 *
                                         static_cast<double>(t) / 4.0) +
                   0.1 * static_cast<double>(t % 4);
        p.incidence.push_back({v});
        p.queries.push_back({});
    }
    p.location_ids = {"A"};
    return p;
}

double rmse_of(const std::vector<ForecastRecord>& recs) {
    std::vector<double> p, a;
    for (const auto& r : recs) {
        p.push_back(r.predicted);
        a.push_back(r.actual);
    }
    return rmse(p, a);
}

} // namespace

TEST_CASE("persistence forecast copies the value h weeks back") {
    SynthConfig cfg;
    cfg.weeks = 30;
    cfg.locations = 2;
    cfg.queries = 0;
    auto panel = synthesize_panel(cfg, 4);

    ForecastTask task{4, std::nullopt, false};
    auto recs = persistence_forecast(panel, task, {10, 30});
    REQUIRE(recs.size() == 20 * 2);
    for (const auto& r : recs) {
        std::size_t l = panel.location_index(r.location);
        CHECK(r.predicted == panel.incidence[r.week_index - 4][l]);
        CHECK(r.actual == panel.incidence[r.week_index][l]);
    }

    ForecastTask single{2, "loc01", false};
    auto one = persistence_forecast(panel, single, {5, 8});
    CHECK(one.size() == 3);
    CHECK(one[0].location == "loc01");

    CHECK_THROWS_AS(persistence_forecast(panel, task, WeekInterval{2, 5}), ModelError);
}

TEST_CASE("walk_forward with the persistence family equals persistence_forecast") {
    SynthConfig cfg;
    cfg.weeks = 52;
    cfg.locations = 3;
    cfg.queries = 0;
    auto panel = synthesize_panel(cfg, 11);
    auto sp = split(panel, 0.5);

    ForecastTask task{1, std::nullopt, false};
    ModelSpec spec;
    spec.kind = ModelKind::P;
    auto a = walk_forward(panel, task, spec, sp);
    auto b = persistence_forecast(panel, task, sp.test_range);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].predicted == b[i].predicted);
        CHECK(a[i].actual == b[i].actual);
    }
}

TEST_CASE("select_hyperparams returns the single candidate untouched") {
    SynthConfig cfg;
    cfg.weeks = 80;
    cfg.locations = 2;
    cfg.queries = 0;
    auto panel = synthesize_panel(cfg, 8);

    ModelSpec spec;
    spec.kind = ModelKind::GRU;
    spec.base.lookback_N = 4;
    ForecastTask task{1, std::nullopt, false};
    auto hyper = select_hyperparams(panel, task, spec, {0, 40});
    CHECK(hyper.lookback_N == 4);
}

TEST_CASE("select_hyperparams prefers the strongest penalty on pure noise") {
    // targets independent of features: every lambda scores alike up to
    // noise, and heavy shrinkage toward the mean should win
    PanelDataset p;
    Rng rng = make_rng(21);
    IsoWeek w{2013, 1};
    for (std::size_t t = 0; t < 120; ++t) {
        p.weeks.push_back(format_iso_week(w));
        w = next_iso_week(w);
        p.incidence.push_back({rng.normal()});
        p.queries.push_back({});
    }
    p.location_ids = {"A"};

    ModelSpec spec;
    spec.kind = ModelKind::AR;
    spec.base.lookback_N = 4;
    spec.lambda_grid = {1e-5, 1e-1};
    ForecastTask task{1, "A", false};
    auto hyper = select_hyperparams(p, task, spec, {0, 120});
    CHECK(hyper.l1_penalty_lambda == 1e-1);
}

TEST_CASE("select_hyperparams avoids overgrown trees on a depth-1 signal") {
    PanelDataset p;
    Rng rng = make_rng(31);
    IsoWeek w{2013, 1};
    std::vector<double> series{0.0};
    for (std::size_t t = 1; t < 160; ++t)
        series.push_back(series.back() > 0.5 ? 0.0 + 0.05 * rng.normal()
                                             : 1.0 + 0.05 * rng.normal());
    for (std::size_t t = 0; t < 160; ++t) {
        p.weeks.push_back(format_iso_week(w));
        w = next_iso_week(w);
        p.incidence.push_back({series[t]});
        p.queries.push_back({});
    }
    p.location_ids = {"A"};

    ModelSpec spec;
    spec.kind = ModelKind::RF;
    spec.base.lookback_N = 2;
    spec.base.tree_count = 20;
    spec.region_grid = {1};
    spec.depth_grid = {2, 16};
    ForecastTask task{1, "A", false};
    auto hyper = select_hyperparams(p, task, spec, {0, 160}, 5);
    CHECK(hyper.max_depth == 2);
}

TEST_CASE("AR beats persistence on a noiseless periodic signal") {
    auto panel = periodic_panel(120);
    auto sp = split(panel, 0.6);
    ForecastTask task{2, "A", false};

    ModelSpec ar;
    ar.kind = ModelKind::AR;
    ar.base.lookback_N = 8;
    ModelSpec pers;
    pers.kind = ModelKind::P;

    auto ar_recs = walk_forward(panel, task, ar, sp);
    auto p_recs = walk_forward(panel, task, pers, sp);
    CHECK(rmse_of(ar_recs) < rmse_of(p_recs));
}

TEST_CASE("walk_forward record bookkeeping") {
    SynthConfig cfg;
    cfg.weeks = 90;
    cfg.locations = 3;
    cfg.queries = 4;
    auto panel = synthesize_panel(cfg, 17);
    auto sp = split(panel, 0.5);

    ForecastTask task{1, "loc01", true};
    ModelSpec spec;
    spec.kind = ModelKind::AR;
    spec.use_queries = true;
    spec.base.lookback_N = 6;
    spec.lambda_grid = {1e-3, 1e-2};

    auto recs = walk_forward(panel, task, spec, sp);
    REQUIRE(recs.size() == sp.test_range.end - sp.test_range.begin);
    for (const auto& r : recs) {
        CHECK(r.location == "loc01");
        CHECK(r.model == ModelKind::AR);
        CHECK(r.use_queries);
        CHECK(r.horizon_h == 1);
        std::size_t l = panel.location_index(r.location);
        CHECK(r.actual == panel.incidence[r.week_index][l]);
    }
}

TEST_CASE("predictions come back in original units") {
    // a linear trend the lasso learns exactly: the denormalized prediction
    // should land near the raw-scale truth, far outside [0, 1]
    PanelDataset p;
    IsoWeek w{2014, 1};
    for (std::size_t t = 0; t < 60; ++t) {
        p.weeks.push_back(format_iso_week(w));
        w = next_iso_week(w);
        p.incidence.push_back({100.0 + 5.0 * static_cast<double>(t)});
        p.queries.push_back({});
    }
    p.location_ids = {"A"};
    auto sp = split(p, 0.5);

    ForecastTask task{1, "A", false};
    ModelSpec spec;
    spec.kind = ModelKind::AR;
    spec.base.lookback_N = 3;
    spec.lambda_grid = {1e-6};
    auto recs = walk_forward(p, task, spec, sp);
    for (const auto& r : recs) {
        CHECK(r.actual > 100.0);
        CHECK_THAT(r.predicted, Catch::Matchers::WithinAbs(r.actual, 2.0));
    }
}

TEST_CASE("walk-forward never reads weeks beyond the as-of point") {
    // poisoning the future (weeks > t - h for epi, > t for queries) must
    // not change the prediction at week t
    SynthConfig cfg;
    cfg.weeks = 100;
    cfg.locations = 3;
    cfg.queries = 4;
    auto panel = synthesize_panel(cfg, 23);
    auto sp = split(panel, 0.6);
    const double sentinel = 1e9;

    ForecastTask task{2, "loc00", true};
    ModelSpec spec;
    spec.kind = ModelKind::LR;
    spec.use_queries = true;
    spec.base.lookback_N = 5;
    WalkForwardOptions opts;
    ModelHyperparams fixed;
    fixed.lookback_N = 5;
    fixed.region_count_R = 2;
    fixed.query_region_count_R = 2;
    fixed.l1_penalty_lambda = 1e-3;
    opts.fixed_hyper = fixed;

    auto clean = walk_forward(panel, task, spec, sp, opts);

    for (std::size_t t : {sp.test_range.begin, sp.test_range.begin + 5}) {
        auto poisoned = panel;
        for (std::size_t w = t - task.horizon_h + 1; w < panel.num_weeks(); ++w)
            for (auto& v : poisoned.incidence[w]) v = sentinel;
        for (std::size_t w = t + 1; w < panel.num_weeks(); ++w)
            for (auto& v : poisoned.queries[w]) v = sentinel;
        SplitSpec one{sp.train_range, {t, t + 1}};
        auto rec = walk_forward(poisoned, task, spec, one, opts);
        REQUIRE(rec.size() == 1);
        std::size_t idx = t - sp.test_range.begin;
        CHECK(rec[0].predicted == clean[idx].predicted);
    }
}

TEST_CASE("walk_forward GRU covers all locations and is deterministic") {
    SynthConfig cfg;
    cfg.weeks = 60;
    cfg.locations = 2;
    cfg.queries = 3;
    auto panel = synthesize_panel(cfg, 29);
    SplitSpec sp{{0, 50}, {50, 54}};

    ForecastTask task{1, std::nullopt, true};
    ModelSpec spec;
    spec.kind = ModelKind::GRU;
    spec.use_queries = true;
    spec.base.lookback_N = 8;
    spec.base.query_count_G = 2;
    spec.base.gru.epochs = 15;
    WalkForwardOptions opts;
    opts.seed = 3;

    auto a = walk_forward(panel, task, spec, sp, opts);
    auto b = walk_forward(panel, task, spec, sp, opts);
    REQUIRE(a.size() == 4 * 2);
    for (std::size_t i = 0; i < a.size(); ++i)
        CHECK(a[i].predicted == b[i].predicted);

    opts.gru_retrain = GruRetrainMode::warm;
    opts.gru_warm_epochs = 5;
    auto warm = walk_forward(panel, task, spec, sp, opts);
    CHECK(warm.size() == a.size());
    // first week identical (cold start), later weeks generally diverge
    CHECK(warm[0].predicted == a[0].predicted);
}
