#ifndef FLUCAST_PLOTS_HPP
#define FLUCAST_PLOTS_HPP

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "flucast/attribution.hpp"
#include "flucast/errors.hpp"
#include "flucast/report.hpp"

namespace flucast {

namespace detail {

inline std::string svg_num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

inline double quantile(std::vector<double> sorted, double q) {
    if (sorted.empty()) return 0.0;
    double pos = q * static_cast<double>(sorted.size() - 1);
    std::size_t lo = static_cast<std::size_t>(std::floor(pos));
    std::size_t hi = static_cast<std::size_t>(std::ceil(pos));
    double frac = pos - static_cast<double>(lo);
    return sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
}

} // namespace detail

/// Box plot of per-location RMSE for one horizon, one box per
/// (model, query usage) group. The raw data table is embedded in an SVG
/// comment so the figure is self-contained.
inline void write_rmse_distribution_svg(const EvaluationReport& report, std::size_t horizon,
                                        const std::string& path) {
    struct Group {
        std::string label;
        std::vector<double> values; // sorted
    };
    std::vector<Group> groups;
    for (const auto& [key, locs] : report.rmse_by_location) {
        if (key.horizon_h != horizon) continue;
        Group g;
        g.label = to_string(key.model) + (key.use_queries ? "+GT" : "");
        for (const auto& [loc, v] : locs) g.values.push_back(v);
        std::sort(g.values.begin(), g.values.end());
        groups.push_back(std::move(g));
    }
    if (groups.empty())
        throw DataError("no RMSE data for horizon " + std::to_string(horizon));

    double vmax = 0.0;
    for (const auto& g : groups) vmax = std::max(vmax, g.values.back());
    if (vmax <= 0.0) vmax = 1.0;

    const double width = 120.0 * static_cast<double>(groups.size()) + 80.0;
    const double height = 360.0;
    const double plot_top = 30.0, plot_bottom = height - 50.0;
    auto y_of = [&](double v) {
        return plot_bottom - (v / vmax) * (plot_bottom - plot_top);
    };

    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path);
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
        << height << "\">\n";
    out << "<!-- data: group,location_rmse...\n";
    for (const auto& g : groups) {
        out << g.label;
        for (double v : g.values) out << ',' << detail::svg_num(v);
        out << '\n';
    }
    out << "-->\n";
    out << "<text x=\"10\" y=\"18\" font-size=\"14\">RMSE distribution, horizon "
        << horizon << " weeks</text>\n";
    out << "<line x1=\"60\" y1=\"" << plot_top << "\" x2=\"60\" y2=\"" << plot_bottom
        << "\" stroke=\"black\"/>\n";
    out << "<text x=\"8\" y=\"" << plot_top + 4 << "\" font-size=\"10\">"
        << detail::svg_num(vmax) << "</text>\n";
    out << "<text x=\"8\" y=\"" << plot_bottom << "\" font-size=\"10\">0</text>\n";

    for (std::size_t i = 0; i < groups.size(); ++i) {
        const auto& g = groups[i];
        double cx = 80.0 + 120.0 * static_cast<double>(i) + 50.0;
        double q1 = detail::quantile(g.values, 0.25);
        double q2 = detail::quantile(g.values, 0.50);
        double q3 = detail::quantile(g.values, 0.75);
        double lo = g.values.front(), hi = g.values.back();
        const char* fill = g.label.find("+GT") != std::string::npos ? "#7fb3d5" : "#a9dfbf";
        out << "<line x1=\"" << cx << "\" y1=\"" << y_of(lo) << "\" x2=\"" << cx
            << "\" y2=\"" << y_of(hi) << "\" stroke=\"black\"/>\n";
        out << "<rect x=\"" << cx - 25 << "\" y=\"" << y_of(q3) << "\" width=\"50\" height=\""
            << std::max(1.0, y_of(q1) - y_of(q3)) << "\" fill=\"" << fill
            << "\" stroke=\"black\"/>\n";
        out << "<line x1=\"" << cx - 25 << "\" y1=\"" << y_of(q2) << "\" x2=\"" << cx + 25
            << "\" y2=\"" << y_of(q2) << "\" stroke=\"black\" stroke-width=\"2\"/>\n";
        out << "<text x=\"" << cx - 25 << "\" y=\"" << height - 25
            << "\" font-size=\"12\">" << g.label << "</text>\n";
    }
    out << "</svg>\n";
}

/// Attribution panel: bar chart for single-row maps (coefficients,
/// importances), step-by-channel heatmap for saliency maps.
inline void write_attribution_svg(const AttributionMap& map, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path);

    if (map.values.size() == 1) {
        // top-20 magnitudes as horizontal bars
        const auto& row = map.values[0];
        std::vector<std::size_t> order(row.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return std::abs(row[a]) > std::abs(row[b]);
        });
        std::size_t shown = std::min<std::size_t>(20, order.size());
        double vmax = shown > 0 ? std::abs(row[order[0]]) : 1.0;
        if (vmax <= 0.0) vmax = 1.0;
        double height = 40.0 + 18.0 * static_cast<double>(shown);
        out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"560\" height=\"" << height
            << "\">\n";
        out << "<!-- data: feature,value\n";
        for (std::size_t i : order)
            out << map.col_labels[i] << ',' << detail::svg_num(row[i]) << '\n';
        out << "-->\n";
        out << "<text x=\"10\" y=\"18\" font-size=\"14\">" << map.model_kind << " "
            << map.row_labels[0] << "s " << map.location << " h=" << map.horizon
            << "</text>\n";
        for (std::size_t k = 0; k < shown; ++k) {
            std::size_t i = order[k];
            double y = 30.0 + 18.0 * static_cast<double>(k);
            double w = 250.0 * std::abs(row[i]) / vmax;
            const char* fill = row[i] >= 0.0 ? "#2e86c1" : "#c0392b";
            out << "<text x=\"10\" y=\"" << y + 12 << "\" font-size=\"10\">"
                << map.col_labels[i] << "</text>\n";
            out << "<rect x=\"300\" y=\"" << y << "\" width=\"" << std::max(0.5, w)
                << "\" height=\"14\" fill=\"" << fill << "\"/>\n";
        }
        out << "</svg>\n";
        return;
    }

    // heatmap: steps along x, channels along y
    const std::size_t steps = map.values.size();
    const std::size_t channels = map.values[0].size();
    double vmax = 0.0;
    for (const auto& r : map.values)
        for (double v : r) vmax = std::max(vmax, std::abs(v));
    if (vmax <= 0.0) vmax = 1.0;
    const double cell = 12.0;
    double width = 120.0 + cell * static_cast<double>(steps);
    double height = 40.0 + cell * static_cast<double>(channels);
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
        << height << "\">\n";
    out << "<!-- data: step";
    for (const auto& c : map.col_labels) out << ',' << c;
    out << '\n';
    for (std::size_t r = 0; r < steps; ++r) {
        out << map.row_labels[r];
        for (double v : map.values[r]) out << ',' << detail::svg_num(v);
        out << '\n';
    }
    out << "-->\n";
    out << "<text x=\"10\" y=\"18\" font-size=\"14\">" << map.model_kind << " saliency "
        << map.location << " h=" << map.horizon << "</text>\n";
    for (std::size_t c = 0; c < channels; ++c) {
        double y = 30.0 + cell * static_cast<double>(c);
        if (c < map.col_labels.size())
            out << "<text x=\"10\" y=\"" << y + 10 << "\" font-size=\"8\">"
                << map.col_labels[c] << "</text>\n";
        for (std::size_t s = 0; s < steps; ++s) {
            double x = 120.0 + cell * static_cast<double>(s);
            int shade = static_cast<int>(255.0 * (1.0 - std::abs(map.values[s][c]) / vmax));
            out << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << cell
                << "\" height=\"" << cell << "\" fill=\"rgb(255," << shade << ',' << shade
                << ")\"/>\n";
        }
    }
    out << "</svg>\n";
}

} // namespace flucast

#endif
