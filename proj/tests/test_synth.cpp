#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "flucast/stats.hpp"
#include "flucast/synth.hpp"

using namespace flucast;

TEST_CASE("synthesize_panel is deterministic per seed") {
    SynthConfig cfg;
    cfg.weeks = 60;
    cfg.locations = 4;
    cfg.queries = 6;
    auto a = synthesize_panel(cfg, 42);
    auto b = synthesize_panel(cfg, 42);
    CHECK(a.incidence == b.incidence);
    CHECK(a.queries == b.queries);
    CHECK(a.weeks == b.weeks);

    auto c = synthesize_panel(cfg, 43);
    CHECK(a.incidence != c.incidence);
}

TEST_CASE("noise-free query mirrors its source location exactly") {
    SynthConfig cfg;
    cfg.weeks = 80;
    cfg.locations = 3;
    cfg.queries = 3;
    cfg.noise = 0.0;
    cfg.query_lag = 0;
    auto panel = synthesize_panel(cfg, 7);
    // query i copies location i (q mod L with Q == L)
    for (std::size_t q = 0; q < 3; ++q) {
        auto qs = panel.query_series(q, {0, 80});
        auto ls = panel.incidence_series(q, {0, 80});
        CHECK_THAT(pearson(qs, ls), Catch::Matchers::WithinAbs(1.0, 1e-12));
    }
}

TEST_CASE("full-scale panel has strictly positive mean incidence per location") {
    SynthConfig cfg;
    cfg.weeks = 416;
    cfg.locations = 37;
    cfg.queries = 20;
    auto panel = synthesize_panel(cfg, 7);
    REQUIRE(panel.num_weeks() == 416);
    REQUIRE(panel.num_locations() == 37);
    for (std::size_t l = 0; l < panel.num_locations(); ++l) {
        double mean = 0.0;
        for (std::size_t t = 0; t < panel.num_weeks(); ++t)
            mean += panel.incidence[t][l];
        mean /= static_cast<double>(panel.num_weeks());
        CHECK(mean > 0.0);
    }
}

TEST_CASE("synthesize_panel rejects bad dimensions") {
    SynthConfig cfg;
    cfg.weeks = 0;
    CHECK_THROWS_AS(synthesize_panel(cfg, 1), ConfigError);
    cfg.weeks = 10;
    cfg.locations = 0;
    CHECK_THROWS_AS(synthesize_panel(cfg, 1), ConfigError);
}

TEST_CASE("synthesis config parsing") {
    auto path = (std::filesystem::temp_directory_path() / "flucast_synth.cfg").string();
    {
        std::ofstream out(path);
        out << "# demo panel\n"
            << "weeks = 104\n"
            << "locations = 5\n"
            << "queries = 8\n"
            << "seasonal_amplitude = 12.5\n"
            << "peaks = 3\n"
            << "mixing = 0.4\n"
            << "noise = 0.05\n"
            << "seed = 99\n";
    }
    auto cfg = parse_synth_config(path);
    CHECK(cfg.weeks == 104);
    CHECK(cfg.locations == 5);
    CHECK(cfg.queries == 8);
    CHECK(cfg.seasonal_amplitude == 12.5);
    CHECK(cfg.peaks == 3);
    CHECK(cfg.mixing == 0.4);
    CHECK(cfg.noise == 0.05);
    CHECK(cfg.seed == 99);

    {
        std::ofstream out(path);
        out << "wibble = 3\n";
    }
    CHECK_THROWS_AS(parse_synth_config(path), ConfigError);
}
