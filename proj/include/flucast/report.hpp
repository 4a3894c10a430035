#ifndef FLUCAST_REPORT_HPP
#define FLUCAST_REPORT_HPP

#include <algorithm>
#include <cstddef>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "flucast/attribution.hpp"
#include "flucast/errors.hpp"
#include "flucast/harness.hpp"
#include "flucast/lasso.hpp"
#include "flucast/panel.hpp"
#include "flucast/stats.hpp"

namespace flucast {

struct ReportKey {
    ModelKind model = ModelKind::P;
    bool use_queries = false;
    std::size_t horizon_h = 1;

    bool operator<(const ReportKey& o) const {
        return std::tie(model, use_queries, horizon_h) <
               std::tie(o.model, o.use_queries, o.horizon_h);
    }
    bool operator==(const ReportKey& o) const {
        return model == o.model && use_queries == o.use_queries && horizon_h == o.horizon_h;
    }
};

/// Per-location RMSE distributions per (model, queries, horizon), plus
/// signed-rank comparisons against the persistence baseline at the same
/// horizon.
struct EvaluationReport {
    std::map<ReportKey, std::map<std::string, double>> rmse_by_location;
    std::map<ReportKey, WilcoxonResult> vs_persistence;
};

inline EvaluationReport build_report(const std::vector<ForecastRecord>& records) {
    EvaluationReport report;
    std::map<ReportKey, std::map<std::string, std::pair<std::vector<double>, std::vector<double>>>>
        grouped;
    for (const auto& r : records) {
        ReportKey key{r.model, r.use_queries, r.horizon_h};
        auto& [pred, actual] = grouped[key][r.location];
        pred.push_back(r.predicted);
        actual.push_back(r.actual);
    }
    for (auto& [key, locs] : grouped)
        for (auto& [loc, pa] : locs)
            report.rmse_by_location[key][loc] = rmse(pa.first, pa.second);

    for (auto& [key, locs] : report.rmse_by_location) {
        if (key.model == ModelKind::P) continue;
        ReportKey base{ModelKind::P, false, key.horizon_h};
        auto it = report.rmse_by_location.find(base);
        if (it == report.rmse_by_location.end()) continue;
        std::vector<double> a, b;
        for (auto& [loc, v] : locs) {
            auto jt = it->second.find(loc);
            if (jt != it->second.end()) {
                a.push_back(v);
                b.push_back(jt->second);
            }
        }
        if (a.empty()) continue;
        try {
            report.vs_persistence[key] = wilcoxon_signed_rank(a, b);
        } catch (const ModelError&) {
            // identical RMSE distributions: no decision possible, skip
        }
    }
    return report;
}

// ---------------------------------------------------------------------------
// CSV emission and ingestion
// ---------------------------------------------------------------------------

namespace detail {

inline std::vector<std::string> split_csv_row(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        std::size_t comma = line.find(',', start);
        if (comma == std::string::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
    return out;
}

} // namespace detail

/// Forecast log: one row per record, sorted by week then location then
/// (model, use_queries, horizon).
inline void write_forecast_log(std::vector<ForecastRecord> records,
                               const std::string& path) {
    std::stable_sort(records.begin(), records.end(),
                     [](const ForecastRecord& a, const ForecastRecord& b) {
                         return std::tie(a.week, a.location, a.model, a.use_queries,
                                         a.horizon_h) <
                                std::tie(b.week, b.location, b.model, b.use_queries,
                                         b.horizon_h);
                     });
    std::ofstream out(path);
    if (!out)
        throw DataError("cannot write forecast log " + path);
    out << "week,location,horizon,model,use_queries,predicted,actual\n";
    for (const auto& r : records)
        out << r.week << ',' << r.location << ',' << r.horizon_h << ','
            << to_string(r.model) << ',' << (r.use_queries ? 1 : 0) << ','
            << detail::format_value(r.predicted) << ',' << detail::format_value(r.actual)
            << '\n';
}

inline std::vector<ForecastRecord> read_forecast_log(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw DataError("cannot open forecast log " + path);
    std::string line;
    if (!std::getline(in, line))
        throw DataError("empty forecast log " + path);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "week,location,horizon,model,use_queries,predicted,actual")
        throw DataError("malformed forecast log header in " + path);
    std::vector<ForecastRecord> records;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto cells = detail::split_csv_row(line);
        if (cells.size() != 7)
            throw DataError("malformed row at " + path + ":" + std::to_string(line_no));
        ForecastRecord r;
        r.week = cells[0];
        r.location = cells[1];
        r.horizon_h = std::stoul(cells[2]);
        r.model = model_kind_from_string(cells[3]);
        r.use_queries = cells[4] == "1";
        r.predicted = detail::parse_cell(cells[5], "at " + path + ":" + std::to_string(line_no));
        r.actual = detail::parse_cell(cells[6], "at " + path + ":" + std::to_string(line_no));
        records.push_back(std::move(r));
    }
    return records;
}

/// `model,use_queries,horizon,location,rmse`
inline void write_rmse_table(const EvaluationReport& report, const std::string& path) {
    std::ofstream out(path);
    if (!out)
        throw DataError("cannot write " + path);
    out << "model,use_queries,horizon,location,rmse\n";
    for (const auto& [key, locs] : report.rmse_by_location)
        for (const auto& [loc, v] : locs)
            out << to_string(key.model) << ',' << (key.use_queries ? 1 : 0) << ','
                << key.horizon_h << ',' << loc << ',' << detail::format_value(v) << '\n';
}

/// Rebuild a report from an emitted RMSE table; the signed-rank
/// comparisons are recomputed from the per-location values.
inline EvaluationReport read_rmse_table(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw DataError("cannot open rmse table " + path);
    std::string line;
    if (!std::getline(in, line))
        throw DataError("empty rmse table " + path);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "model,use_queries,horizon,location,rmse")
        throw DataError("malformed rmse table header in " + path);
    EvaluationReport report;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto cells = detail::split_csv_row(line);
        if (cells.size() != 5)
            throw DataError("malformed row at " + path + ":" + std::to_string(line_no));
        ReportKey key{model_kind_from_string(cells[0]), cells[1] == "1",
                      std::stoul(cells[2])};
        report.rmse_by_location[key][cells[3]] =
            detail::parse_cell(cells[4], "at " + path + ":" + std::to_string(line_no));
    }
    for (auto& [key, locs] : report.rmse_by_location) {
        if (key.model == ModelKind::P) continue;
        ReportKey base{ModelKind::P, false, key.horizon_h};
        auto it = report.rmse_by_location.find(base);
        if (it == report.rmse_by_location.end()) continue;
        std::vector<double> a, b;
        for (auto& [loc, v] : locs) {
            auto jt = it->second.find(loc);
            if (jt != it->second.end()) {
                a.push_back(v);
                b.push_back(jt->second);
            }
        }
        if (a.empty()) continue;
        try {
            report.vs_persistence[key] = wilcoxon_signed_rank(a, b);
        } catch (const ModelError&) {
        }
    }
    return report;
}

/// `model,use_queries,horizon,w,p,n_eff,method` (mirrors the comparison
/// table layout against persistence)
inline void write_wilcoxon_table(const EvaluationReport& report, const std::string& path) {
    std::ofstream out(path);
    if (!out)
        throw DataError("cannot write " + path);
    out << "model,use_queries,horizon,w,p,n_eff,method\n";
    for (const auto& [key, res] : report.vs_persistence)
        out << to_string(key.model) << ',' << (key.use_queries ? 1 : 0) << ','
            << key.horizon_h << ',' << detail::format_value(res.w_statistic) << ','
            << detail::format_value(res.p_value) << ',' << res.n_effective << ','
            << res.method << '\n';
}

/// Single-row attributions (coefficients, importances) as a two-column
/// CSV sorted by descending magnitude; matrix attributions (saliency) as
/// a step-by-channel grid.
inline void write_attribution_csv(const AttributionMap& map, const std::string& path,
                                  const std::string& value_column) {
    std::ofstream out(path);
    if (!out)
        throw DataError("cannot write " + path);
    if (map.values.size() == 1) {
        out << "feature," << value_column << '\n';
        std::vector<std::size_t> order(map.values[0].size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return std::abs(map.values[0][a]) > std::abs(map.values[0][b]);
        });
        for (std::size_t i : order)
            out << map.col_labels[i] << ',' << detail::format_value(map.values[0][i]) << '\n';
    } else {
        out << "step";
        for (const auto& c : map.col_labels) out << ',' << c;
        out << '\n';
        for (std::size_t r = 0; r < map.values.size(); ++r) {
            out << map.row_labels[r];
            for (double v : map.values[r]) out << ',' << detail::format_value(v);
            out << '\n';
        }
    }
}

inline AttributionMap coefficient_attribution(const LinearModel& model,
                                              const std::vector<std::string>& feature_names,
                                              const std::string& model_kind,
                                              const std::string& location,
                                              std::size_t horizon) {
    AttributionMap map;
    map.model_kind = model_kind;
    map.location = location;
    map.horizon = horizon;
    map.row_labels = {"coefficient"};
    map.col_labels = feature_names;
    map.values = {model.coefficients};
    return map;
}

} // namespace flucast

#endif
