#ifndef FLUCAST_EXPERIMENT_HPP
#define FLUCAST_EXPERIMENT_HPP

#include <atomic>
#include <cstddef>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "flucast/errors.hpp"
#include "flucast/harness.hpp"
#include "flucast/panel.hpp"
#include "flucast/plots.hpp"
#include "flucast/report.hpp"
#include "flucast/synth.hpp"

#include <json.hpp>

namespace flucast {

inline constexpr std::string_view kVersion = "0.1.0";

/// Full experiment description. Loaded from a JSON file; see the README
/// for the schema.
struct ExperimentConfig {
    // data source: exactly one of the two
    std::optional<std::string> synth_config_path;
    std::optional<std::string> incidence_csv;
    std::optional<std::string> queries_csv;

    std::vector<ModelSpec> models;
    std::vector<std::size_t> horizons = {1, 2, 4, 8};
    double train_fraction = 0.5;
    std::uint64_t seed = 0;
    std::string output_dir = "out";
    GruRetrainMode gru_retrain = GruRetrainMode::full;
    std::size_t gru_warm_epochs = 50;
    std::size_t reselect_every = 0;
    std::size_t jobs = 1;
    bool emit_attributions = true;

    std::string canonical_json; // as loaded, for the manifest hash
};

inline ExperimentConfig parse_experiment_config(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot open experiment config " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("invalid JSON in " + path + ": " + e.what());
    }

    ExperimentConfig cfg;
    try {
        const auto& data = j.at("data");
        if (data.contains("synth_config")) {
            cfg.synth_config_path = data["synth_config"].get<std::string>();
        } else if (data.contains("incidence_csv")) {
            cfg.incidence_csv = data["incidence_csv"].get<std::string>();
            if (data.contains("queries_csv"))
                cfg.queries_csv = data["queries_csv"].get<std::string>();
        } else {
            throw ConfigError("config needs data.synth_config or data.incidence_csv");
        }

        for (const auto& m : j.at("models")) {
            ModelSpec spec;
            spec.kind = model_kind_from_string(m.at("kind").get<std::string>());
            spec.use_queries = m.value("use_queries", false);
            if (m.contains("lookback")) spec.base.lookback_N = m["lookback"].get<std::size_t>();
            if (m.contains("query_count"))
                spec.base.query_count_G = m["query_count"].get<std::size_t>();
            if (m.contains("tree_count"))
                spec.base.tree_count = m["tree_count"].get<std::size_t>();
            if (m.contains("gru_epochs"))
                spec.base.gru.epochs = m["gru_epochs"].get<std::size_t>();
            if (m.contains("gru_hidden"))
                spec.base.gru.hidden_units = m["gru_hidden"].get<std::size_t>();
            if (m.contains("lambda_grid"))
                spec.lambda_grid = m["lambda_grid"].get<std::vector<double>>();
            if (m.contains("region_grid"))
                spec.region_grid = m["region_grid"].get<std::vector<std::size_t>>();
            if (m.contains("depth_grid"))
                spec.depth_grid = m["depth_grid"].get<std::vector<std::size_t>>();
            cfg.models.push_back(std::move(spec));
        }
        if (cfg.models.empty())
            throw ConfigError("config needs at least one model");

        if (j.contains("horizons"))
            cfg.horizons = j["horizons"].get<std::vector<std::size_t>>();
        if (cfg.horizons.empty())
            throw ConfigError("config needs at least one horizon");
        cfg.train_fraction = j.value("train_fraction", 0.5);
        cfg.seed = j.value("seed", 0ULL);
        cfg.output_dir = j.value("output_dir", "out");
        std::string retrain = j.value("gru_retrain", "full");
        if (retrain == "full") cfg.gru_retrain = GruRetrainMode::full;
        else if (retrain == "warm") cfg.gru_retrain = GruRetrainMode::warm;
        else throw ConfigError("gru_retrain must be 'full' or 'warm'");
        cfg.gru_warm_epochs = j.value("gru_warm_epochs", 50UL);
        cfg.reselect_every = j.value("reselect_every", 0UL);
        cfg.jobs = j.value("jobs", 1UL);
        cfg.emit_attributions = j.value("emit_attributions", true);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("bad experiment config " + path + ": " + e.what());
    }
    cfg.canonical_json = j.dump();
    return cfg;
}

struct ExperimentResult {
    std::vector<ForecastRecord> records;
    EvaluationReport report;
    std::vector<std::string> emitted_files;
};

namespace detail {

struct Job {
    ModelSpec spec;
    ForecastTask task;
};

inline std::vector<Job> plan_jobs(const ExperimentConfig& cfg, const PanelDataset& panel) {
    std::vector<Job> jobs;
    for (const auto& spec : cfg.models) {
        for (std::size_t h : cfg.horizons) {
            if (spec.kind == ModelKind::GRU || spec.kind == ModelKind::P) {
                Job job;
                job.spec = spec;
                job.task.horizon_h = h;
                job.task.use_queries = spec.use_queries;
                jobs.push_back(std::move(job));
            } else {
                for (const auto& loc : panel.location_ids) {
                    Job job;
                    job.spec = spec;
                    job.task.horizon_h = h;
                    job.task.target_location = loc;
                    job.task.use_queries = spec.use_queries;
                    jobs.push_back(std::move(job));
                }
            }
        }
    }
    return jobs;
}

inline double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

/// Interpretability dumps: refit each tabular model on its training-range
/// examples and extract coefficients/importances; train the GRU once per
/// horizon and take saliency at the last training example.
inline void emit_attributions(const ExperimentConfig& cfg, const PanelDataset& panel,
                              const SplitSpec& split, ExperimentResult& result) {
    namespace fs = std::filesystem;
    fs::path dir = fs::path(cfg.output_dir) / "attributions";
    fs::create_directories(dir);

    NormalizationParams norm = fit_normalizer(panel, split.train_range);
    PanelDataset np = normalize(panel, norm, NormalizeDirection::forward);

    auto emit = [&](const AttributionMap& map, const std::string& stem,
                    const std::string& value_column) {
        std::string csv = (dir / (stem + ".csv")).string();
        std::string svg = (dir / (stem + ".svg")).string();
        write_attribution_csv(map, csv, value_column);
        write_attribution_svg(map, svg);
        result.emitted_files.push_back(csv);
        result.emitted_files.push_back(svg);
    };

    for (const auto& spec : cfg.models) {
        if (spec.kind == ModelKind::P) continue;
        std::string tag = to_string(spec.kind) + (spec.use_queries ? "_gt" : "");
        for (std::size_t h : cfg.horizons) {
            ForecastTask task;
            task.horizon_h = h;
            task.use_queries = spec.use_queries;

            if (spec.kind == ModelKind::GRU) {
                ModelHyperparams hyper = spec.base;
                std::vector<std::string> queries;
                if (spec.use_queries) {
                    std::size_t g =
                        std::min<std::size_t>(hyper.query_count_G, np.num_queries());
                    queries = select_top_queries(np, g, split.train_range);
                }
                SequenceBatch sb = build_sequences(np, task, hyper, queries);
                std::vector<std::vector<std::vector<double>>> tx;
                std::vector<std::vector<double>> ty;
                for (std::size_t i = 0; i < sb.num_examples(); ++i) {
                    if (sb.target_weeks[i] < split.train_range.end) {
                        tx.push_back(sb.inputs[i]);
                        ty.push_back(sb.targets[i]);
                    }
                }
                if (tx.empty()) continue;
                GruDims dims{np.num_locations() + queries.size(), hyper.gru.hidden_units,
                             np.num_locations()};
                TrainConfig tc;
                tc.learning_rate = hyper.gru.learning_rate;
                tc.dropout_rate = hyper.gru.dropout_rate;
                tc.batch_size = hyper.gru.batch_size;
                tc.epochs = hyper.gru.epochs;
                tc.seed = make_rng(cfg.seed).stream("attr-gru", h).next_u64();
                auto trained = train_gru(
                    init_gru(dims, make_rng(cfg.seed).stream("attr-gru-init", h).next_u64()),
                    tx, ty, tc);
                for (std::size_t l = 0; l < np.num_locations(); ++l) {
                    AttributionMap map =
                        saliency(trained.params, tx.back(), l, sb.channel_names);
                    map.location = np.location_ids[l];
                    map.horizon = h;
                    emit(map, tag + "_" + np.location_ids[l] + "_h" + std::to_string(h),
                         "saliency");
                }
                continue;
            }

            for (const auto& loc : np.location_ids) {
                task.target_location = loc;
                ModelHyperparams hyper =
                    select_hyperparams(np, task, spec, split.train_range, cfg.seed);
                auto regions = rank_regions(np, loc, split.train_range);
                std::vector<std::string> queries;
                if (spec.use_queries) {
                    queries = spec.kind == ModelKind::AR
                                  ? np.query_ids
                                  : detail::queries_for_regions(
                                        np, regions, hyper.query_region_count_R,
                                        split.train_range);
                }
                DesignMatrix dm = build_tabular(np, task, hyper,
                                                spec.kind == ModelKind::AR
                                                    ? TabularKind::AR
                                                    : TabularKind::LR,
                                                regions, queries);
                std::vector<std::vector<double>> tx;
                std::vector<double> ty;
                for (std::size_t i = 0; i < dm.num_rows(); ++i) {
                    if (dm.target_weeks[i] < split.train_range.end) {
                        tx.push_back(dm.features[i]);
                        ty.push_back(dm.targets[i]);
                    }
                }
                if (tx.empty()) continue;
                std::string stem = tag + "_" + loc + "_h" + std::to_string(h);
                if (spec.kind == ModelKind::RF) {
                    ForestParams fp;
                    fp.tree_count = hyper.tree_count;
                    fp.max_depth = hyper.max_depth;
                    Forest forest =
                        fit_forest(tx, ty, fp,
                                   make_rng(cfg.seed).stream("attr-rf", h).next_u64(),
                                   dm.feature_names);
                    AttributionMap map = forest_importances(forest, dm.feature_names.size());
                    map.location = loc;
                    map.horizon = h;
                    emit(map, stem, "importance");
                } else {
                    LinearModel model = fit_lasso(tx, ty, hyper.l1_penalty_lambda);
                    AttributionMap map = coefficient_attribution(
                        model, dm.feature_names, to_string(spec.kind), loc, h);
                    emit(map, stem, "coefficient");
                }
            }
        }
    }
}

} // namespace detail

inline PanelDataset load_experiment_panel(const ExperimentConfig& cfg) {
    if (cfg.synth_config_path) {
        SynthConfig sc = parse_synth_config(*cfg.synth_config_path);
        return synthesize_panel(sc, sc.seed);
    }
    return load_panel_csv(*cfg.incidence_csv, cfg.queries_csv);
}

/// End-to-end run: ingest/synthesize, walk-forward every configured
/// (model, horizon, location) job, evaluate, and emit forecast logs,
/// tables, attributions, plots, and a manifest. Reruns with an identical
/// config are byte-identical except for the manifest timestamp.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg) {
    namespace fs = std::filesystem;
    fs::create_directories(cfg.output_dir);
    fs::create_directories(fs::path(cfg.output_dir) / "plots");

    PanelDataset panel = load_experiment_panel(cfg);
    SplitSpec sp = split(panel, cfg.train_fraction);

    WalkForwardOptions options;
    options.seed = cfg.seed;
    options.gru_retrain = cfg.gru_retrain;
    options.gru_warm_epochs = cfg.gru_warm_epochs;
    options.reselect_every = cfg.reselect_every;

    auto jobs = detail::plan_jobs(cfg, panel);
    std::vector<std::vector<ForecastRecord>> per_job(jobs.size());
    std::vector<std::string> job_errors(jobs.size());

    auto run_job = [&](std::size_t i) {
        const auto& job = jobs[i];
        try {
            per_job[i] = walk_forward(panel, job.task, job.spec, sp, options);
        } catch (const std::exception& e) {
            job_errors[i] = "(model " + to_string(job.spec.kind) + ", location " +
                            job.task.target_location.value_or("all") + ", horizon " +
                            std::to_string(job.task.horizon_h) + "): " + e.what();
        }
    };

    if (cfg.jobs <= 1) {
        for (std::size_t i = 0; i < jobs.size(); ++i) run_job(i);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> workers;
        std::size_t n_workers = std::min<std::size_t>(cfg.jobs, jobs.size());
        for (std::size_t w = 0; w < n_workers; ++w)
            workers.emplace_back([&] {
                for (std::size_t i = next.fetch_add(1); i < jobs.size();
                     i = next.fetch_add(1))
                    run_job(i);
            });
        for (auto& t : workers) t.join();
    }
    for (const auto& err : job_errors)
        if (!err.empty())
            throw ModelError("walk-forward failed " + err);

    ExperimentResult result;
    for (auto& recs : per_job)
        for (auto& r : recs) result.records.push_back(std::move(r));

    fs::path out(cfg.output_dir);
    std::string log_path = (out / "forecasts.csv").string();
    write_forecast_log(result.records, log_path);
    result.emitted_files.push_back(log_path);

    result.report = build_report(result.records);
    std::string rmse_path = (out / "rmse.csv").string();
    write_rmse_table(result.report, rmse_path);
    result.emitted_files.push_back(rmse_path);
    if (!result.report.vs_persistence.empty()) {
        std::string wx_path = (out / "wilcoxon.csv").string();
        write_wilcoxon_table(result.report, wx_path);
        result.emitted_files.push_back(wx_path);
    }

    for (std::size_t h : cfg.horizons) {
        std::string plot_path = (out / "plots" / ("rmse_h" + std::to_string(h) + ".svg")).string();
        write_rmse_distribution_svg(result.report, h, plot_path);
        result.emitted_files.push_back(plot_path);
    }

    if (cfg.emit_attributions)
        detail::emit_attributions(cfg, panel, sp, result);

    // manifest last: its presence with complete=true marks a finished run
    nlohmann::json manifest;
    manifest["version"] = std::string(kVersion);
    manifest["config_hash"] = fnv1a64(cfg.canonical_json);
    manifest["seed"] = cfg.seed;
    manifest["rng_algorithm"] = std::string(kRngAlgorithm);
    manifest["gru_retrain"] =
        cfg.gru_retrain == GruRetrainMode::full ? "full" : "warm";
    manifest["complete"] = true;
    manifest["generated_at"] = static_cast<std::uint64_t>(std::time(nullptr));
    manifest["files"] = result.emitted_files;
    nlohmann::json medians = nlohmann::json::object();
    for (const auto& [key, locs] : result.report.rmse_by_location) {
        std::vector<double> vals;
        for (const auto& [loc, v] : locs) vals.push_back(v);
        std::string name = to_string(key.model) + (key.use_queries ? "+GT" : "") + "_h" +
                           std::to_string(key.horizon_h);
        medians[name] = detail::median(vals);
    }
    manifest["median_rmse"] = medians;
    std::string manifest_path = (out / "manifest.json").string();
    std::ofstream mf(manifest_path);
    mf << manifest.dump(1) << "\n";
    result.emitted_files.push_back(manifest_path);
    return result;
}

} // namespace flucast

#endif
