#ifndef FLUCAST_HARNESS_HPP
#define FLUCAST_HARNESS_HPP

#include <algorithm>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "flucast/errors.hpp"
#include "flucast/features.hpp"
#include "flucast/forest.hpp"
#include "flucast/gru.hpp"
#include "flucast/lasso.hpp"
#include "flucast/panel.hpp"
#include "flucast/rng.hpp"
#include "flucast/stats.hpp"

namespace flucast {

enum class ModelKind { P, AR, LR, RF, GRU };

inline std::string to_string(ModelKind k) {
    switch (k) {
        case ModelKind::P: return "P";
        case ModelKind::AR: return "AR";
        case ModelKind::LR: return "LR";
        case ModelKind::RF: return "RF";
        case ModelKind::GRU: return "GRU";
    }
    return "?";
}

inline ModelKind model_kind_from_string(const std::string& s) {
    if (s == "P") return ModelKind::P;
    if (s == "AR") return ModelKind::AR;
    if (s == "LR") return ModelKind::LR;
    if (s == "RF") return ModelKind::RF;
    if (s == "GRU") return ModelKind::GRU;
    throw ConfigError("unknown model kind '" + s + "'");
}

/// Hyperparameter search space for one model family. The default grids
/// follow the standard tuning setup: lambda over five decades, region
/// counts over {10, 20, 40} (independently for epidemiological and query
/// channels), forest depth over {2, 4, 8, 16}.
struct ModelSpec {
    ModelKind kind = ModelKind::P;
    bool use_queries = false;
    ModelHyperparams base; // lookback, G, tree count, GRU config
    std::vector<double> lambda_grid = {1e-5, 1e-4, 1e-3, 1e-2, 1e-1};
    std::vector<std::size_t> region_grid = {10, 20, 40};
    std::vector<std::size_t> depth_grid = {2, 4, 8, 16};
};

struct ForecastRecord {
    std::string week;
    std::size_t week_index = 0;
    std::string location;
    std::size_t horizon_h = 1;
    ModelKind model = ModelKind::P;
    bool use_queries = false;
    double predicted = 0.0; // original units
    double actual = 0.0;    // original units
};

/// Naive baseline: propagate the incidence observed h weeks ago.
inline std::vector<ForecastRecord> persistence_forecast(const PanelDataset& panel,
                                                        const ForecastTask& task,
                                                        WeekInterval range) {
    if (task.horizon_h < 1)
        throw ModelError("persistence_forecast: horizon must be >= 1");
    if (range.begin < task.horizon_h)
        throw ModelError("persistence_forecast: range reaches before the panel start");
    std::vector<std::size_t> locs;
    if (task.target_location)
        locs.push_back(panel.location_index(*task.target_location));
    else
        for (std::size_t l = 0; l < panel.num_locations(); ++l) locs.push_back(l);

    std::vector<ForecastRecord> records;
    for (std::size_t t = range.begin; t < range.end; ++t) {
        for (std::size_t l : locs) {
            ForecastRecord r;
            r.week = panel.weeks[t];
            r.week_index = t;
            r.location = panel.location_ids[l];
            r.horizon_h = task.horizon_h;
            r.model = ModelKind::P;
            r.use_queries = false;
            r.predicted = panel.incidence[t - task.horizon_h][l];
            r.actual = panel.incidence[t][l];
            records.push_back(std::move(r));
        }
    }
    return records;
}

namespace detail {

/// Query channels for the networked (LR/RF) models: each query is
/// attributed to its best-correlated location over the training range,
/// and the model takes the channels attributed to its top query-regions.
inline std::vector<std::string> queries_for_regions(const PanelDataset& panel,
                                                    const std::vector<std::string>& regions,
                                                    std::size_t region_count,
                                                    WeekInterval range) {
    std::size_t r_used = std::min<std::size_t>(region_count, regions.size());
    std::vector<bool> wanted(panel.num_locations(), false);
    for (std::size_t i = 0; i < r_used; ++i)
        wanted[panel.location_index(regions[i])] = true;

    std::vector<std::string> out;
    for (std::size_t q = 0; q < panel.num_queries(); ++q) {
        auto qs = panel.query_series(q, range);
        double best = -std::numeric_limits<double>::infinity();
        std::size_t best_loc = 0;
        bool defined = false;
        for (std::size_t l = 0; l < panel.num_locations(); ++l) {
            try {
                double c = pearson(qs, panel.incidence_series(l, range));
                if (!defined || c > best) {
                    best = c;
                    best_loc = l;
                    defined = true;
                }
            } catch (const ModelError&) {
            }
        }
        if (defined && wanted[best_loc])
            out.push_back(panel.query_ids[q]);
    }
    std::sort(out.begin(), out.end());
    return out;
}

struct Candidate {
    ModelHyperparams hyper;
};

/// Candidate grid in tie-break preference order: larger lambda first,
/// then smaller region counts, then smaller depth. The first candidate
/// achieving the strictly lowest CV score wins.
inline std::vector<Candidate> candidate_grid(const ModelSpec& spec, std::size_t n_locations) {
    std::vector<Candidate> out;
    auto clamp_regions = [&](std::vector<std::size_t> grid) {
        for (auto& r : grid) r = std::min(r, n_locations);
        std::sort(grid.begin(), grid.end());
        grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
        return grid;
    };
    switch (spec.kind) {
        case ModelKind::P:
        case ModelKind::GRU: {
            out.push_back({spec.base});
            break;
        }
        case ModelKind::AR: {
            auto lambdas = spec.lambda_grid;
            std::sort(lambdas.rbegin(), lambdas.rend());
            for (double l : lambdas) {
                Candidate c{spec.base};
                c.hyper.l1_penalty_lambda = l;
                out.push_back(c);
            }
            break;
        }
        case ModelKind::LR: {
            auto lambdas = spec.lambda_grid;
            std::sort(lambdas.rbegin(), lambdas.rend());
            auto regions = clamp_regions(spec.region_grid);
            for (double l : lambdas)
                for (std::size_t r : regions) {
                    if (spec.use_queries) {
                        for (std::size_t rq : regions) {
                            Candidate c{spec.base};
                            c.hyper.l1_penalty_lambda = l;
                            c.hyper.region_count_R = r;
                            c.hyper.query_region_count_R = rq;
                            out.push_back(c);
                        }
                    } else {
                        Candidate c{spec.base};
                        c.hyper.l1_penalty_lambda = l;
                        c.hyper.region_count_R = r;
                        out.push_back(c);
                    }
                }
            break;
        }
        case ModelKind::RF: {
            auto depths = spec.depth_grid;
            std::sort(depths.begin(), depths.end());
            auto regions = clamp_regions(spec.region_grid);
            for (std::size_t r : regions)
                for (std::size_t d : depths) {
                    if (spec.use_queries) {
                        for (std::size_t rq : regions) {
                            Candidate c{spec.base};
                            c.hyper.max_depth = d;
                            c.hyper.region_count_R = r;
                            c.hyper.query_region_count_R = rq;
                            out.push_back(c);
                        }
                    } else {
                        Candidate c{spec.base};
                        c.hyper.max_depth = d;
                        c.hyper.region_count_R = r;
                        out.push_back(c);
                    }
                }
            break;
        }
    }
    return out;
}

/// Fit the tabular model of `kind` on the given rows and score RMSE on
/// the validation rows.
inline double score_tabular(ModelKind kind, const DesignMatrix& dm,
                            const std::vector<std::size_t>& train_rows,
                            const std::vector<std::size_t>& valid_rows,
                            const ModelHyperparams& hyper, std::uint64_t seed) {
    std::vector<std::vector<double>> x;
    std::vector<double> y;
    x.reserve(train_rows.size());
    for (std::size_t i : train_rows) {
        x.push_back(dm.features[i]);
        y.push_back(dm.targets[i]);
    }
    std::vector<double> pred, actual;
    if (kind == ModelKind::RF) {
        ForestParams fp;
        fp.tree_count = hyper.tree_count;
        fp.max_depth = hyper.max_depth;
        Forest forest = fit_forest(x, y, fp, seed);
        for (std::size_t i : valid_rows) {
            pred.push_back(predict_forest(forest, dm.features[i]));
            actual.push_back(dm.targets[i]);
        }
    } else {
        LinearModel model = fit_lasso(x, y, hyper.l1_penalty_lambda);
        for (std::size_t i : valid_rows) {
            pred.push_back(predict_linear(model, dm.features[i]));
            actual.push_back(dm.targets[i]);
        }
    }
    return rmse(pred, actual);
}

} // namespace detail

/// 4-fold chronological cross-validation over the training range.
/// `panel` is expected in normalized units. Deterministic; ties resolve
/// toward the smaller model via the candidate ordering.
inline ModelHyperparams select_hyperparams(const PanelDataset& panel,
                                           const ForecastTask& task, const ModelSpec& spec,
                                           WeekInterval train_range,
                                           std::uint64_t seed = 0) {
    auto candidates = detail::candidate_grid(spec, panel.num_locations());
    if (candidates.size() == 1)
        return candidates[0].hyper;

    // examples restricted to targets inside the training range
    std::vector<std::string> regions;
    if (task.target_location)
        regions = rank_regions(panel, *task.target_location, train_range);

    const std::size_t folds = 4;
    double best_score = std::numeric_limits<double>::infinity();
    std::optional<ModelHyperparams> best;
    Rng cv_rng = make_rng(seed);

    for (const auto& cand : candidates) {
        std::vector<std::string> queries;
        if (spec.use_queries) {
            if (spec.kind == ModelKind::AR) {
                queries = panel.query_ids; // single-location model takes all channels
            } else {
                queries = detail::queries_for_regions(panel, regions,
                                                      cand.hyper.query_region_count_R,
                                                      train_range);
            }
        }
        DesignMatrix dm = build_tabular(panel, task, cand.hyper,
                                        spec.kind == ModelKind::AR ? TabularKind::AR
                                                                   : TabularKind::LR,
                                        regions, queries);
        std::vector<std::size_t> rows;
        for (std::size_t i = 0; i < dm.num_rows(); ++i)
            if (dm.target_weeks[i] >= train_range.begin &&
                dm.target_weeks[i] < train_range.end)
                rows.push_back(i);
        if (rows.size() < folds)
            throw ModelError("select_hyperparams: too few examples for 4 folds");

        double total = 0.0;
        for (std::size_t f = 0; f < folds; ++f) {
            std::size_t lo = f * rows.size() / folds;
            std::size_t hi = (f + 1) * rows.size() / folds;
            std::vector<std::size_t> valid(rows.begin() + lo, rows.begin() + hi);
            std::vector<std::size_t> train;
            for (std::size_t i = 0; i < rows.size(); ++i)
                if (i < lo || i >= hi) train.push_back(rows[i]);
            total += detail::score_tabular(spec.kind, dm, train, valid, cand.hyper,
                                           cv_rng.stream("cv-fold", f).next_u64());
        }
        double mean_score = total / static_cast<double>(folds);
        if (mean_score < best_score) {
            best_score = mean_score;
            best = cand.hyper;
        }
    }
    return *best;
}

enum class GruRetrainMode { full, warm };

struct WalkForwardOptions {
    std::uint64_t seed = 0;
    GruRetrainMode gru_retrain = GruRetrainMode::full;
    std::size_t gru_warm_epochs = 50;   // per-week epochs in warm mode
    std::size_t reselect_every = 0;     // 0 = select hyperparameters once
    std::optional<ModelHyperparams> fixed_hyper; // skip CV entirely when set
};

/// Walk-forward ("dynamic training") evaluation over the test range.
/// Normalization and hyperparameters come from the initial training range
/// only; every week-t prediction is fit on examples whose targets were
/// observed by t - h. Records are reported in original units.
inline std::vector<ForecastRecord> walk_forward(const PanelDataset& panel,
                                                const ForecastTask& task,
                                                const ModelSpec& spec, const SplitSpec& split,
                                                const WalkForwardOptions& options = {}) {
    const std::size_t h = task.horizon_h;
    if (spec.kind == ModelKind::P)
        return persistence_forecast(panel, task, split.test_range);
    if (h < 1)
        throw ModelError("walk_forward: horizon must be >= 1");
    if (split.train_range.end <= split.train_range.begin + h)
        throw ModelError("walk_forward: training range shorter than the horizon");

    // With an h-week reporting delay, incidence inside the last h-1 weeks
    // of the training range has not been observed when the first test-week
    // prediction is made, so every train-time quantity (normalization,
    // region ranking, query selection, hyperparameter search) is fit on
    // the delay-adjusted interval only.
    const WeekInterval fit_range{split.train_range.begin, split.train_range.end - h + 1};

    NormalizationParams norm = fit_normalizer(panel, fit_range);
    PanelDataset np = normalize(panel, norm, NormalizeDirection::forward);

    std::vector<std::string> regions;
    if (task.target_location)
        regions = rank_regions(np, *task.target_location, fit_range);

    ModelHyperparams hyper;
    if (options.fixed_hyper) {
        hyper = *options.fixed_hyper;
    } else {
        hyper = select_hyperparams(np, task, spec, fit_range, options.seed);
    }

    std::vector<std::string> queries;
    if (task.use_queries || spec.use_queries) {
        if (spec.kind == ModelKind::GRU) {
            std::size_t g = std::min<std::size_t>(hyper.query_count_G, np.num_queries());
            queries = select_top_queries(np, g, fit_range);
        } else if (spec.kind == ModelKind::AR) {
            queries = np.query_ids;
        } else {
            queries = detail::queries_for_regions(np, regions, hyper.query_region_count_R,
                                                  fit_range);
        }
    }

    std::vector<ForecastRecord> records;
    Rng root = make_rng(options.seed);

    auto make_record = [&](std::size_t t, std::size_t loc, double pred_norm) {
        ForecastRecord r;
        r.week = panel.weeks[t];
        r.week_index = t;
        r.location = panel.location_ids[loc];
        r.horizon_h = h;
        r.model = spec.kind;
        r.use_queries = spec.use_queries;
        r.predicted = norm.inverse_incidence(loc, pred_norm);
        r.actual = panel.incidence[t][loc];
        return r;
    };

    if (spec.kind == ModelKind::GRU) {
        SequenceBatch sb = build_sequences(np, task, hyper, queries);
        GruDims dims{np.num_locations() + queries.size(), hyper.gru.hidden_units,
                     np.num_locations()};
        std::optional<GruParameters> warm_params;

        for (std::size_t t = split.test_range.begin; t < split.test_range.end; ++t) {
            // training examples observed by the as-of week
            std::vector<std::vector<std::vector<double>>> tx;
            std::vector<std::vector<double>> ty;
            std::ptrdiff_t predict_idx = -1;
            for (std::size_t i = 0; i < sb.num_examples(); ++i) {
                if (sb.target_weeks[i] + h <= t) {
                    tx.push_back(sb.inputs[i]);
                    ty.push_back(sb.targets[i]);
                } else if (sb.target_weeks[i] == t) {
                    predict_idx = static_cast<std::ptrdiff_t>(i);
                }
            }
            if (tx.empty() || predict_idx < 0)
                throw ModelError("walk_forward: insufficient history at week " +
                                 panel.weeks[t]);
            TrainConfig tc;
            tc.learning_rate = hyper.gru.learning_rate;
            tc.dropout_rate = hyper.gru.dropout_rate;
            tc.batch_size = hyper.gru.batch_size;
            tc.seed = root.stream("gru-week", t).next_u64();

            GruParameters start_params =
                (options.gru_retrain == GruRetrainMode::warm && warm_params)
                    ? *warm_params
                    : init_gru(dims, root.stream("gru-init", t).next_u64());
            tc.epochs = (options.gru_retrain == GruRetrainMode::warm && warm_params)
                            ? options.gru_warm_epochs
                            : hyper.gru.epochs;

            TrainResult trained;
            try {
                trained = train_gru(std::move(start_params), tx, ty, tc);
            } catch (const ModelError& e) {
                throw ModelError(std::string(e.what()) + " (week " + panel.weeks[t] + ")");
            }
            auto fwd = gru_forward(trained.params, sb.inputs[predict_idx]);
            for (std::size_t l = 0; l < np.num_locations(); ++l)
                records.push_back(make_record(t, l, fwd.output[l]));
            if (options.gru_retrain == GruRetrainMode::warm)
                warm_params = trained.params;
        }
        return records;
    }

    // tabular families
    if (!task.target_location)
        throw ModelError("walk_forward: tabular models need a target location");
    TabularKind tk = spec.kind == ModelKind::AR ? TabularKind::AR : TabularKind::LR;
    DesignMatrix dm = build_tabular(np, task, hyper, tk, regions, queries);
    std::size_t target_loc = panel.location_index(*task.target_location);

    for (std::size_t t = split.test_range.begin; t < split.test_range.end; ++t) {
        // optional periodic hyperparameter re-selection on all data observed so far
        if (options.reselect_every > 0 && t > split.test_range.begin &&
            (t - split.test_range.begin) % options.reselect_every == 0 &&
            !options.fixed_hyper && t > h) {
            WeekInterval seen{0, t - h + 1};
            hyper = select_hyperparams(np, task, spec, seen, options.seed);
            if (spec.use_queries && spec.kind != ModelKind::AR)
                queries = detail::queries_for_regions(np, regions,
                                                      hyper.query_region_count_R, seen);
            dm = build_tabular(np, task, hyper, tk, regions, queries);
        }
        std::vector<std::vector<double>> tx;
        std::vector<double> ty;
        std::ptrdiff_t predict_idx = -1;
        for (std::size_t i = 0; i < dm.num_rows(); ++i) {
            if (dm.target_weeks[i] + h <= t) {
                tx.push_back(dm.features[i]);
                ty.push_back(dm.targets[i]);
            } else if (dm.target_weeks[i] == t) {
                predict_idx = static_cast<std::ptrdiff_t>(i);
            }
        }
        if (tx.empty() || predict_idx < 0)
            throw ModelError("walk_forward: insufficient history at week " + panel.weeks[t]);

        double pred_norm = 0.0;
        try {
            if (spec.kind == ModelKind::RF) {
                ForestParams fp;
                fp.tree_count = hyper.tree_count;
                fp.max_depth = hyper.max_depth;
                Forest forest = fit_forest(tx, ty, fp,
                                           root.stream("rf-week", t).next_u64());
                pred_norm = predict_forest(forest, dm.features[predict_idx]);
            } else {
                LinearModel model = fit_lasso(tx, ty, hyper.l1_penalty_lambda);
                pred_norm = predict_linear(model, dm.features[predict_idx]);
            }
        } catch (const ModelError& e) {
            throw ModelError(std::string(e.what()) + " (week " + panel.weeks[t] + ")");
        }
        records.push_back(make_record(t, target_loc, pred_norm));
    }
    return records;
}

} // namespace flucast

#endif
