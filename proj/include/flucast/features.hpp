#ifndef FLUCAST_FEATURES_HPP
#define FLUCAST_FEATURES_HPP

#include <algorithm>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "flucast/errors.hpp"
#include "flucast/panel.hpp"

namespace flucast {

struct ForecastTask {
    std::size_t horizon_h = 1;
    std::optional<std::string> target_location; // absent for all-locations models
    bool use_queries = false;
};

struct GruConfig {
    std::size_t hidden_units = 5;
    double dropout_rate = 0.3;
    double learning_rate = 0.001;
    std::size_t epochs = 1000;
    std::size_t batch_size = 16;
};

inline constexpr std::size_t kAllRegions = std::numeric_limits<std::size_t>::max();

struct ModelHyperparams {
    std::size_t lookback_N = 52;
    std::size_t region_count_R = kAllRegions;       // epidemiological channels
    std::size_t query_region_count_R = kAllRegions; // query channels (networked models)
    std::size_t query_count_G = 10;
    double l1_penalty_lambda = 0.0;
    std::size_t tree_count = 50;
    std::size_t max_depth = 8;
    GruConfig gru;
};

/// Tabular supervised examples. Feature k of a row targeting week t is
/// either an epidemiological lag (`epi:<location>:lag<j>`, value at week
/// t - h - (j-1)) or a synchronous query volume (`query:<term>`, value at
/// week t itself).
struct DesignMatrix {
    std::vector<std::string> feature_names;
    std::vector<std::vector<double>> features; // rows x p
    std::vector<double> targets;
    std::vector<std::size_t> target_weeks;     // week index per row

    std::size_t num_rows() const { return targets.size(); }
};

/// Sequence examples for the recurrent model: each input is lookback_N
/// steps x (L + G_used) channels, channel order locations then queries.
struct SequenceBatch {
    std::vector<std::string> channel_names;
    std::vector<std::vector<std::vector<double>>> inputs; // example x step x channel
    std::vector<std::vector<double>> targets;             // example x L
    std::vector<std::size_t> target_weeks;

    std::size_t num_examples() const { return targets.size(); }
};

enum class TabularKind { AR, LR };

/// Locations ordered by descending training-period correlation with the
/// target's incidence; the target itself is always first, ties break
/// lexicographically, undefined correlations rank last.
inline std::vector<std::string> rank_regions(const PanelDataset& panel,
                                             const std::string& target,
                                             WeekInterval range) {
    std::size_t target_idx = panel.location_index(target);
    auto target_series = panel.incidence_series(target_idx, range);
    std::vector<std::pair<double, std::string>> scored;
    for (std::size_t l = 0; l < panel.num_locations(); ++l) {
        if (l == target_idx) continue;
        double score = -std::numeric_limits<double>::infinity();
        try {
            score = pearson(panel.incidence_series(l, range), target_series);
        } catch (const ModelError&) {
        }
        scored.emplace_back(score, panel.location_ids[l]);
    }
    std::stable_sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    std::vector<std::string> out;
    out.reserve(panel.num_locations());
    out.push_back(target);
    for (auto& [s, id] : scored) out.push_back(id);
    return out;
}

namespace detail {

inline std::size_t first_feasible_target(std::size_t lookback, std::size_t horizon) {
    return lookback + horizon - 1;
}

} // namespace detail

/// Build the design matrix for the linear and forest model families.
/// kind=AR uses lags of the target location only; kind=LR uses lags from
/// the first region_count_R entries of `regions`. Query ids in `queries`
/// contribute one synchronous (week-t) feature each.
inline DesignMatrix build_tabular(const PanelDataset& panel, const ForecastTask& task,
                                  const ModelHyperparams& hyper, TabularKind kind,
                                  const std::vector<std::string>& regions,
                                  const std::vector<std::string>& queries) {
    if (!task.target_location)
        throw ModelError("build_tabular: task needs a target location");
    const std::size_t n_lag = hyper.lookback_N;
    const std::size_t h = task.horizon_h;
    const std::size_t t_len = panel.num_weeks();

    std::vector<std::size_t> lag_locs;
    if (kind == TabularKind::AR) {
        lag_locs.push_back(panel.location_index(*task.target_location));
    } else {
        std::size_t r = std::min<std::size_t>(hyper.region_count_R, regions.size());
        if (regions.empty())
            throw ModelError("build_tabular: LR needs a region list");
        for (std::size_t i = 0; i < r; ++i)
            lag_locs.push_back(panel.location_index(regions[i]));
    }
    std::vector<std::size_t> query_cols;
    for (const auto& q : queries)
        query_cols.push_back(panel.query_index(q));

    DesignMatrix dm;
    for (std::size_t loc : lag_locs)
        for (std::size_t j = 1; j <= n_lag; ++j)
            dm.feature_names.push_back("epi:" + panel.location_ids[loc] + ":lag" +
                                       std::to_string(j));
    for (std::size_t q : query_cols)
        dm.feature_names.push_back("query:" + panel.query_ids[q]);

    const std::size_t t0 = detail::first_feasible_target(n_lag, h);
    if (t0 >= t_len)
        throw ModelError("build_tabular: insufficient history for lookback " +
                         std::to_string(n_lag) + " at horizon " + std::to_string(h));
    std::size_t target_loc = panel.location_index(*task.target_location);
    for (std::size_t t = t0; t < t_len; ++t) {
        std::vector<double> row;
        row.reserve(dm.feature_names.size());
        for (std::size_t loc : lag_locs)
            for (std::size_t j = 1; j <= n_lag; ++j)
                row.push_back(panel.incidence[t - h - (j - 1)][loc]);
        for (std::size_t q : query_cols)
            row.push_back(panel.queries[t][q]);
        dm.features.push_back(std::move(row));
        dm.targets.push_back(panel.incidence[t][target_loc]);
        dm.target_weeks.push_back(t);
    }
    return dm;
}

/// Sequence batch for the all-locations recurrent model. The example
/// targeting week t has steps for weeks t-h-N+1 .. t-h; each step holds
/// all L incidence values plus the week-t query volumes broadcast to
/// every step.
inline SequenceBatch build_sequences(const PanelDataset& panel, const ForecastTask& task,
                                     const ModelHyperparams& hyper,
                                     const std::vector<std::string>& queries) {
    const std::size_t n_lag = hyper.lookback_N;
    const std::size_t h = task.horizon_h;
    const std::size_t t_len = panel.num_weeks();
    const std::size_t n_loc = panel.num_locations();

    std::vector<std::size_t> query_cols;
    for (const auto& q : queries)
        query_cols.push_back(panel.query_index(q));

    SequenceBatch sb;
    for (const auto& id : panel.location_ids) sb.channel_names.push_back("epi:" + id);
    for (std::size_t q : query_cols) sb.channel_names.push_back("query:" + panel.query_ids[q]);

    const std::size_t t0 = detail::first_feasible_target(n_lag, h);
    if (t0 >= t_len)
        throw ModelError("build_sequences: insufficient history");
    for (std::size_t t = t0; t < t_len; ++t) {
        std::vector<std::vector<double>> steps(n_lag);
        for (std::size_t s = 0; s < n_lag; ++s) {
            std::size_t week = t - h - (n_lag - 1) + s;
            auto& step = steps[s];
            step.reserve(n_loc + query_cols.size());
            for (std::size_t l = 0; l < n_loc; ++l)
                step.push_back(panel.incidence[week][l]);
            for (std::size_t q : query_cols)
                step.push_back(panel.queries[t][q]);
        }
        sb.inputs.push_back(std::move(steps));
        sb.targets.push_back(panel.incidence[t]);
        sb.target_weeks.push_back(t);
    }
    return sb;
}

} // namespace flucast

#endif
