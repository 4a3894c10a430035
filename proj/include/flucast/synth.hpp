#ifndef FLUCAST_SYNTH_HPP
#define FLUCAST_SYNTH_HPP

#include <cmath>
#include <cstddef>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "flucast/errors.hpp"
#include "flucast/panel.hpp"
#include "flucast/rng.hpp"

namespace flucast {

/// Parameters of the synthetic panel generator. Key-value config schema
/// (one `key = value` per line, `#` comments):
///   weeks, locations, queries     dimensions T, L, Q
///   seasonal_amplitude            height of the annual sinusoid
///   peaks                         epidemic peaks planted per location
///   mixing                        ring-neighbor mixing weight in [0, 1)
///   noise                         additive noise scale (0 disables)
///   query_lag                     weeks each query trails its source location
///   seed                          generator seed
///   rng                           optional; must match the pinned algorithm id
struct SynthConfig {
    std::size_t weeks = 260;
    std::size_t locations = 10;
    std::size_t queries = 20;
    double seasonal_amplitude = 10.0;
    std::size_t peaks = 2;
    double mixing = 0.3;
    double noise = 0.1;
    std::size_t query_lag = 0;
    std::uint64_t seed = 0;
};

inline SynthConfig parse_synth_config(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot open synthesis config " + path);
    SynthConfig cfg;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        auto eq = line.find('=');
        if (eq == std::string::npos) {
            if (line.find_first_not_of(" \t\r") != std::string::npos)
                throw ConfigError(path + ":" + std::to_string(line_no) +
                                  ": expected 'key = value'");
            continue;
        }
        auto trim = [](std::string s) {
            auto b = s.find_first_not_of(" \t\r");
            auto e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        std::string key = trim(line.substr(0, eq));
        std::string val = trim(line.substr(eq + 1));
        try {
            if (key == "weeks") cfg.weeks = std::stoul(val);
            else if (key == "locations") cfg.locations = std::stoul(val);
            else if (key == "queries") cfg.queries = std::stoul(val);
            else if (key == "seasonal_amplitude") cfg.seasonal_amplitude = std::stod(val);
            else if (key == "peaks") cfg.peaks = std::stoul(val);
            else if (key == "mixing") cfg.mixing = std::stod(val);
            else if (key == "noise") cfg.noise = std::stod(val);
            else if (key == "query_lag") cfg.query_lag = std::stoul(val);
            else if (key == "seed") cfg.seed = std::stoull(val);
            else if (key == "rng") {
                if (val != kRngAlgorithm)
                    throw ConfigError("config pins rng '" + val + "' but this build uses '" +
                                      std::string(kRngAlgorithm) + "'");
            } else {
                throw ConfigError("unknown synthesis key '" + key + "'");
            }
        } catch (const std::invalid_argument&) {
            throw ConfigError(path + ":" + std::to_string(line_no) + ": bad value for " + key);
        }
    }
    return cfg;
}

/// Seeded synthetic panel: annual sinusoid + planted epidemic peaks,
/// ring-neighbor spatial mixing, non-negative noise. Query q mirrors
/// location (q mod L) at the configured lag, so planted correlations
/// are recoverable. Bitwise deterministic per seed.
inline PanelDataset synthesize_panel(const SynthConfig& cfg, std::uint64_t seed) {
    if (cfg.weeks == 0 || cfg.locations == 0)
        throw ConfigError("synthesize_panel: dimensions must be positive");
    const std::size_t T = cfg.weeks, L = cfg.locations, Q = cfg.queries;
    Rng root = make_rng(seed);

    PanelDataset panel;
    panel.weeks.reserve(T);
    IsoWeek w{2009, 40};
    for (std::size_t t = 0; t < T; ++t) {
        panel.weeks.push_back(format_iso_week(w));
        w = next_iso_week(w);
    }
    for (std::size_t l = 0; l < L; ++l) {
        char buf[16];
        std::snprintf(buf, sizeof(buf), "loc%02zu", l);
        panel.location_ids.push_back(buf);
    }
    for (std::size_t q = 0; q < Q; ++q) {
        char buf[16];
        std::snprintf(buf, sizeof(buf), "term%03zu", q);
        panel.query_ids.push_back(buf);
    }

    // base signal per location, before mixing
    std::vector<std::vector<double>> base(T, std::vector<double>(L, 0.0));
    for (std::size_t l = 0; l < L; ++l) {
        Rng rl = root.stream("location", l);
        double phase = rl.uniform(0.0, 2.0 * M_PI);
        for (std::size_t t = 0; t < T; ++t) {
            double season = 0.5 * cfg.seasonal_amplitude *
                            (1.0 + std::sin(2.0 * M_PI * static_cast<double>(t) / 52.0 + phase));
            base[t][l] = season;
        }
        for (std::size_t p = 0; p < cfg.peaks; ++p) {
            double center = rl.uniform(0.0, static_cast<double>(T));
            double width = rl.uniform(2.0, 6.0);
            double height = cfg.seasonal_amplitude * rl.uniform(0.5, 2.0);
            for (std::size_t t = 0; t < T; ++t) {
                double z = (static_cast<double>(t) - center) / width;
                base[t][l] += height * std::exp(-0.5 * z * z);
            }
        }
    }

    // ring-neighbor mixing: each location blends with its two index neighbors
    panel.incidence.assign(T, std::vector<double>(L, 0.0));
    for (std::size_t t = 0; t < T; ++t) {
        for (std::size_t l = 0; l < L; ++l) {
            double neighbors = 0.0;
            if (L > 1) {
                std::size_t prev = (l + L - 1) % L;
                std::size_t next = (l + 1) % L;
                neighbors = 0.5 * (base[t][prev] + base[t][next]);
            }
            panel.incidence[t][l] = (1.0 - cfg.mixing) * base[t][l] + cfg.mixing * neighbors;
        }
    }
    if (cfg.noise > 0.0) {
        Rng rn = root.stream("incidence-noise");
        for (std::size_t t = 0; t < T; ++t)
            for (std::size_t l = 0; l < L; ++l)
                panel.incidence[t][l] += cfg.noise * std::abs(rn.normal());
    }

    // queries mirror a source location at a lag, plus their own noise
    panel.queries.assign(T, std::vector<double>(Q, 0.0));
    if (Q > 0) {
        Rng rq = root.stream("query-noise");
        for (std::size_t q = 0; q < Q; ++q) {
            std::size_t src = q % L;
            for (std::size_t t = 0; t < T; ++t) {
                std::size_t s = t >= cfg.query_lag ? t - cfg.query_lag : 0;
                double v = panel.incidence[s][src];
                if (cfg.noise > 0.0) v += cfg.noise * std::abs(rq.normal());
                panel.queries[t][q] = v;
            }
        }
    }
    return panel;
}

} // namespace flucast

#endif
