// flucast command-line runner: synthesize panels, run experiments,
// recompute reports from forecast logs, and emit figures.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <set>
#include <string>

#include <CLI11.hpp>

#include "flucast/experiment.hpp"
#include "flucast/harness.hpp"
#include "flucast/panel.hpp"
#include "flucast/plots.hpp"
#include "flucast/report.hpp"
#include "flucast/synth.hpp"

namespace {

int run_synth(const std::string& config_path, const std::string& out_dir,
              std::optional<std::uint64_t> seed_override) {
    flucast::SynthConfig cfg = flucast::parse_synth_config(config_path);
    std::uint64_t seed = seed_override.value_or(cfg.seed);
    flucast::PanelDataset panel = flucast::synthesize_panel(cfg, seed);
    std::filesystem::create_directories(out_dir);
    auto inc = (std::filesystem::path(out_dir) / "incidence.csv").string();
    auto qry = (std::filesystem::path(out_dir) / "queries.csv").string();
    if (panel.num_queries() > 0) {
        flucast::save_panel_csv(panel, inc, qry);
        std::cout << "wrote " << inc << " and " << qry << "\n";
    } else {
        flucast::save_panel_csv(panel, inc);
        std::cout << "wrote " << inc << "\n";
    }
    return 0;
}

int run_run(const std::string& config_path, std::optional<std::string> out_dir,
            std::optional<std::uint64_t> seed, std::optional<std::size_t> jobs,
            std::optional<std::string> gru_retrain) {
    flucast::ExperimentConfig cfg = flucast::parse_experiment_config(config_path);
    if (out_dir) cfg.output_dir = *out_dir;
    if (seed) cfg.seed = *seed;
    if (jobs) cfg.jobs = *jobs;
    if (gru_retrain) {
        if (*gru_retrain == "full") cfg.gru_retrain = flucast::GruRetrainMode::full;
        else if (*gru_retrain == "warm") cfg.gru_retrain = flucast::GruRetrainMode::warm;
        else throw flucast::ConfigError("--gru-retrain must be 'full' or 'warm'");
    }
    auto result = flucast::run_experiment(cfg);
    std::cout << result.records.size() << " forecast records, "
              << result.emitted_files.size() << " files under " << cfg.output_dir << "\n";
    return 0;
}

int run_evaluate(const std::string& log_path, const std::string& out_dir) {
    auto records = flucast::read_forecast_log(log_path);
    auto report = flucast::build_report(records);
    std::filesystem::create_directories(out_dir);
    auto rmse_path = (std::filesystem::path(out_dir) / "rmse.csv").string();
    flucast::write_rmse_table(report, rmse_path);
    std::cout << "wrote " << rmse_path << "\n";
    if (!report.vs_persistence.empty()) {
        auto wx_path = (std::filesystem::path(out_dir) / "wilcoxon.csv").string();
        flucast::write_wilcoxon_table(report, wx_path);
        std::cout << "wrote " << wx_path << "\n";
    }
    return 0;
}

int run_plot(const std::string& rmse_path, const std::string& out_dir) {
    auto report = flucast::read_rmse_table(rmse_path);
    std::filesystem::create_directories(out_dir);
    std::set<std::size_t> horizons;
    for (const auto& [key, locs] : report.rmse_by_location)
        horizons.insert(key.horizon_h);
    for (std::size_t h : horizons) {
        auto path =
            (std::filesystem::path(out_dir) / ("rmse_h" + std::to_string(h) + ".svg")).string();
        flucast::write_rmse_distribution_svg(report, h, path);
        std::cout << "wrote " << path << "\n";
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"multi-location influenza nowcasting toolkit"};
    app.require_subcommand(1);

    std::string config_path, out_dir = "out", log_path, rmse_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> jobs;
    std::optional<std::string> gru_retrain;

    auto* synth = app.add_subcommand("synth", "generate a synthetic panel");
    synth->add_option("--config", config_path, "synthesis config file")->required();
    synth->add_option("--out", out_dir, "output directory");
    synth->add_option("--seed", seed, "override the config seed");

    auto* run = app.add_subcommand("run", "run a full experiment");
    run->add_option("--config", config_path, "experiment config (JSON)")->required();
    std::optional<std::string> run_out;
    run->add_option("--out", run_out, "output directory (overrides config)");
    run->add_option("--seed", seed, "override the config seed");
    run->add_option("--jobs", jobs, "parallel walk-forward jobs");
    run->add_option("--gru-retrain", gru_retrain, "full|warm");

    auto* evaluate = app.add_subcommand("evaluate", "recompute reports from a forecast log");
    evaluate->add_option("--log", log_path, "forecast log CSV")->required();
    evaluate->add_option("--out", out_dir, "output directory");

    auto* plot = app.add_subcommand("plot", "emit figures from an RMSE table");
    plot->add_option("--rmse", rmse_path, "rmse table CSV")->required();
    plot->add_option("--out", out_dir, "output directory");

    CLI11_PARSE(app, argc, argv);

    try {
        if (synth->parsed()) return run_synth(config_path, out_dir, seed);
        if (run->parsed()) return run_run(config_path, run_out, seed, jobs, gru_retrain);
        if (evaluate->parsed()) return run_evaluate(log_path, out_dir);
        if (plot->parsed()) return run_plot(rmse_path, out_dir);
    } catch (const flucast::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const flucast::DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const flucast::ModelError& e) {
        std::cerr << "model error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
