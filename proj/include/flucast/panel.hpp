#ifndef FLUCAST_PANEL_HPP
#define FLUCAST_PANEL_HPP

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "flucast/errors.hpp"
#include "flucast/stats.hpp"

namespace flucast {

/// Half-open index range [begin, end) into a panel's week axis.
struct WeekInterval {
    std::size_t begin = 0;
    std::size_t end = 0;
    std::size_t size() const { return end - begin; }
    bool empty() const { return end <= begin; }
};

struct SplitSpec {
    WeekInterval train_range;
    WeekInterval test_range;
};

/// Aligned weekly panel: T weeks x L locations of incidence, plus an
/// optional T x Q block of exogenous query volumes. Immutable by
/// convention after construction.
struct PanelDataset {
    std::vector<std::string> weeks;               // ISO year-week ids, ascending
    std::vector<std::string> location_ids;        // L, unique
    std::vector<std::string> query_ids;           // Q, unique (possibly empty)
    std::vector<std::vector<double>> incidence;   // T x L
    std::vector<std::vector<double>> queries;     // T x Q

    std::size_t num_weeks() const { return weeks.size(); }
    std::size_t num_locations() const { return location_ids.size(); }
    std::size_t num_queries() const { return query_ids.size(); }

    std::size_t location_index(const std::string& id) const {
        auto it = std::find(location_ids.begin(), location_ids.end(), id);
        if (it == location_ids.end())
            throw DataError("unknown location id: " + id);
        return static_cast<std::size_t>(it - location_ids.begin());
    }

    std::size_t query_index(const std::string& id) const {
        auto it = std::find(query_ids.begin(), query_ids.end(), id);
        if (it == query_ids.end())
            throw DataError("unknown query id: " + id);
        return static_cast<std::size_t>(it - query_ids.begin());
    }

    std::vector<double> incidence_series(std::size_t loc, WeekInterval r) const {
        std::vector<double> out;
        out.reserve(r.size());
        for (std::size_t t = r.begin; t < r.end; ++t)
            out.push_back(incidence[t][loc]);
        return out;
    }

    std::vector<double> query_series(std::size_t q, WeekInterval r) const {
        std::vector<double> out;
        out.reserve(r.size());
        for (std::size_t t = r.begin; t < r.end; ++t)
            out.push_back(queries[t][q]);
        return out;
    }
};

// ---------------------------------------------------------------------------
// ISO week calendar
// ---------------------------------------------------------------------------

struct IsoWeek {
    int year = 0;
    int week = 0; // 1..52 or 53
    bool operator<(const IsoWeek& o) const {
        return year != o.year ? year < o.year : week < o.week;
    }
    bool operator==(const IsoWeek& o) const {
        return year == o.year && week == o.week;
    }
};

namespace detail {

// day of week of Jan 1 (0=Sunday..6=Saturday), Sakamoto's method
inline int jan1_weekday(int year) {
    static const int t[] = {0, 3, 2, 5, 0, 3, 5, 1, 4, 6, 2, 4};
    int y = year - 1; // month = 1 < 3
    return (y + y / 4 - y / 100 + y / 400 + t[0] + 1) % 7;
}

inline bool is_leap(int year) {
    return (year % 4 == 0 && year % 100 != 0) || year % 400 == 0;
}

} // namespace detail

inline int iso_weeks_in_year(int year) {
    int wd = detail::jan1_weekday(year); // 0=Sunday
    bool thursday = (wd == 4);
    bool wednesday = (wd == 3);
    return (thursday || (detail::is_leap(year) && wednesday)) ? 53 : 52;
}

/// Parse "2009-W40" style identifiers.
inline IsoWeek parse_iso_week(const std::string& s) {
    IsoWeek w;
    char dash = 0, wch = 0;
    std::istringstream is(s);
    if (!(is >> w.year >> dash >> wch >> w.week) || dash != '-' || wch != 'W' ||
        w.week < 1 || w.week > iso_weeks_in_year(w.year))
        throw DataError("malformed ISO week id: '" + s + "'");
    return w;
}

inline std::string format_iso_week(IsoWeek w) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d-W%02d", w.year, w.week);
    return buf;
}

inline IsoWeek next_iso_week(IsoWeek w) {
    if (w.week < iso_weeks_in_year(w.year)) return {w.year, w.week + 1};
    return {w.year + 1, 1};
}

// ---------------------------------------------------------------------------
// CSV ingestion
// ---------------------------------------------------------------------------

using WarningSink = std::function<void(const std::string&)>;

inline void default_warning_sink(const std::string& msg) {
    std::cerr << "warning: " << msg << "\n";
}

namespace detail {

inline double parse_cell(const std::string& s, const std::string& context) {
    double v;
    auto first = s.data();
    auto last = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last)
        throw DataError("non-numeric value '" + s + "' " + context);
    return v;
}

struct LongCsv {
    std::vector<std::string> series_ids;                   // sorted unique
    std::vector<IsoWeek> weeks;                            // sorted unique
    std::map<std::pair<std::string, std::string>, double> cells; // (week id, series) -> value
};

inline LongCsv read_long_csv(const std::string& path, const std::string& id_column) {
    std::ifstream in(path);
    if (!in)
        throw DataError("cannot open " + path);
    std::string line;
    if (!std::getline(in, line))
        throw DataError("empty file: " + path);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::string expect = "week," + id_column + ",value";
    if (line != expect)
        throw DataError("malformed header in " + path + ": expected '" + expect +
                        "', got '" + line + "'");

    LongCsv out;
    std::set<std::string> ids;
    std::set<IsoWeek> weeks;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::size_t c1 = line.find(',');
        std::size_t c2 = c1 == std::string::npos ? std::string::npos : line.find(',', c1 + 1);
        if (c2 == std::string::npos)
            throw DataError("malformed row at " + path + ":" + std::to_string(line_no));
        std::string week_s = line.substr(0, c1);
        std::string id = line.substr(c1 + 1, c2 - c1 - 1);
        std::string val_s = line.substr(c2 + 1);
        IsoWeek w = parse_iso_week(week_s);
        double v = detail::parse_cell(val_s, "at " + path + ":" + std::to_string(line_no));
        auto key = std::make_pair(format_iso_week(w), id);
        if (!out.cells.emplace(key, v).second)
            throw DataError("duplicate (week, series) pair (" + key.first + ", " + id +
                            ") in " + path);
        ids.insert(id);
        weeks.insert(w);
    }
    out.series_ids.assign(ids.begin(), ids.end());
    out.weeks.assign(weeks.begin(), weeks.end());
    return out;
}

// Keep only series covering every week; report dropped ones.
inline void complete_series(const LongCsv& csv, const std::vector<std::string>& week_ids,
                            std::vector<std::string>& kept,
                            std::vector<std::vector<double>>& columns_to_rows,
                            const std::string& what, const WarningSink& warn) {
    kept.clear();
    std::vector<std::vector<double>> cols;
    for (const auto& id : csv.series_ids) {
        std::vector<double> col;
        col.reserve(week_ids.size());
        bool complete = true;
        for (const auto& wk : week_ids) {
            auto it = csv.cells.find({wk, id});
            if (it == csv.cells.end()) {
                complete = false;
                break;
            }
            col.push_back(it->second);
        }
        if (complete) {
            kept.push_back(id);
            cols.push_back(std::move(col));
        } else {
            warn(what + " '" + id + "' dropped: missing weeks");
        }
    }
    // transpose to T x S
    columns_to_rows.assign(week_ids.size(), std::vector<double>(kept.size()));
    for (std::size_t s = 0; s < kept.size(); ++s)
        for (std::size_t t = 0; t < week_ids.size(); ++t)
            columns_to_rows[t][s] = cols[s][t];
}

} // namespace detail

/// Load a panel from long-format CSVs (`week,location,value` and optional
/// `week,term,value`). Series with any missing week are dropped with a
/// warning. The union of weeks must form a gap-free ISO week sequence.
inline PanelDataset load_panel_csv(const std::string& incidence_path,
                                   std::optional<std::string> queries_path = std::nullopt,
                                   const WarningSink& warn = default_warning_sink) {
    auto inc = detail::read_long_csv(incidence_path, "location");
    if (inc.weeks.empty())
        throw DataError("no data rows in " + incidence_path);

    // calendar contiguity over the union of weeks
    for (std::size_t i = 1; i < inc.weeks.size(); ++i) {
        if (!(next_iso_week(inc.weeks[i - 1]) == inc.weeks[i]))
            throw DataError("gap in weekly calendar between " +
                            format_iso_week(inc.weeks[i - 1]) + " and " +
                            format_iso_week(inc.weeks[i]));
    }

    PanelDataset panel;
    panel.weeks.reserve(inc.weeks.size());
    for (auto w : inc.weeks) panel.weeks.push_back(format_iso_week(w));

    detail::complete_series(inc, panel.weeks, panel.location_ids, panel.incidence,
                            "location", warn);
    if (panel.location_ids.empty())
        throw DataError("no complete location series in " + incidence_path);

    if (queries_path) {
        auto qry = detail::read_long_csv(*queries_path, "term");
        detail::complete_series(qry, panel.weeks, panel.query_ids, panel.queries,
                                "query term", warn);
    } else {
        panel.queries.assign(panel.weeks.size(), {});
    }
    return panel;
}

namespace detail {

inline std::string format_value(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

} // namespace detail

inline void save_panel_csv(const PanelDataset& panel, const std::string& incidence_path,
                           std::optional<std::string> queries_path = std::nullopt) {
    {
        std::ofstream out(incidence_path);
        if (!out) throw DataError("cannot write " + incidence_path);
        out << "week,location,value\n";
        for (std::size_t t = 0; t < panel.num_weeks(); ++t)
            for (std::size_t l = 0; l < panel.num_locations(); ++l)
                out << panel.weeks[t] << ',' << panel.location_ids[l] << ','
                    << detail::format_value(panel.incidence[t][l]) << '\n';
    }
    if (queries_path) {
        std::ofstream out(*queries_path);
        if (!out) throw DataError("cannot write " + *queries_path);
        out << "week,term,value\n";
        for (std::size_t t = 0; t < panel.num_weeks(); ++t)
            for (std::size_t q = 0; q < panel.num_queries(); ++q)
                out << panel.weeks[t] << ',' << panel.query_ids[q] << ','
                    << detail::format_value(panel.queries[t][q]) << '\n';
    }
}

// ---------------------------------------------------------------------------
// Split and normalization
// ---------------------------------------------------------------------------

inline SplitSpec split(const PanelDataset& panel, double train_fraction) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        throw DataError("train fraction must lie in (0, 1)");
    const std::size_t t = panel.num_weeks();
    std::size_t n_train = static_cast<std::size_t>(
        std::floor(static_cast<double>(t) * train_fraction));
    SplitSpec s;
    s.train_range = {0, n_train};
    s.test_range = {n_train, t};
    return s;
}

/// Per-series affine [0,1] scaling, fit on a training range only.
struct NormalizationParams {
    std::vector<std::string> location_ids;
    std::vector<std::string> query_ids;
    std::vector<double> incidence_min, incidence_max; // per location
    std::vector<double> query_min, query_max;         // per query
    WeekInterval fitted_on;

    double forward_incidence(std::size_t loc, double x) const {
        double lo = incidence_min[loc], hi = incidence_max[loc];
        return hi > lo ? (x - lo) / (hi - lo) : 0.0;
    }
    double inverse_incidence(std::size_t loc, double x) const {
        double lo = incidence_min[loc], hi = incidence_max[loc];
        return hi > lo ? x * (hi - lo) + lo : lo;
    }
};

enum class NormalizeDirection { forward, inverse };

inline NormalizationParams fit_normalizer(const PanelDataset& panel, WeekInterval range) {
    if (range.empty() || range.end > panel.num_weeks())
        throw DataError("fit_normalizer: empty or out-of-range interval");
    NormalizationParams p;
    p.location_ids = panel.location_ids;
    p.query_ids = panel.query_ids;
    p.fitted_on = range;
    auto fit = [&](const std::vector<std::vector<double>>& data, std::size_t s,
                   double& lo, double& hi) {
        lo = data[range.begin][s];
        hi = data[range.begin][s];
        for (std::size_t t = range.begin; t < range.end; ++t) {
            lo = std::min(lo, data[t][s]);
            hi = std::max(hi, data[t][s]);
        }
    };
    p.incidence_min.resize(panel.num_locations());
    p.incidence_max.resize(panel.num_locations());
    for (std::size_t l = 0; l < panel.num_locations(); ++l)
        fit(panel.incidence, l, p.incidence_min[l], p.incidence_max[l]);
    p.query_min.resize(panel.num_queries());
    p.query_max.resize(panel.num_queries());
    for (std::size_t q = 0; q < panel.num_queries(); ++q)
        fit(panel.queries, q, p.query_min[q], p.query_max[q]);
    return p;
}

/// Apply (or invert) the affine map on every series. Values outside the
/// fitted range pass through unclipped; degenerate series (max == min)
/// map forward to 0 and invert back to their constant.
inline PanelDataset normalize(const PanelDataset& panel, const NormalizationParams& params,
                              NormalizeDirection direction) {
    if (params.location_ids != panel.location_ids || params.query_ids != panel.query_ids)
        throw DataError("normalize: params do not cover this panel's series");
    PanelDataset out = panel;
    auto apply = [&](std::vector<std::vector<double>>& data,
                     const std::vector<double>& lo, const std::vector<double>& hi) {
        for (auto& row : data) {
            for (std::size_t s = 0; s < row.size(); ++s) {
                double range = hi[s] - lo[s];
                if (range <= 0.0) {
                    row[s] = direction == NormalizeDirection::forward ? 0.0 : lo[s];
                } else if (direction == NormalizeDirection::forward) {
                    row[s] = (row[s] - lo[s]) / range;
                } else {
                    row[s] = row[s] * range + lo[s];
                }
            }
        }
    };
    apply(out.incidence, params.incidence_min, params.incidence_max);
    apply(out.queries, params.query_min, params.query_max);
    return out;
}

// ---------------------------------------------------------------------------
// Query selection
// ---------------------------------------------------------------------------

/// Score each query by its best Pearson correlation with any location's
/// incidence over `range`; return the g top-scoring query ids. Queries
/// whose correlation is undefined against every location score -inf.
/// Ties break lexicographically on the query id.
inline std::vector<std::string> select_top_queries(const PanelDataset& panel, std::size_t g,
                                                   WeekInterval range) {
    if (g > panel.num_queries())
        throw DataError("select_top_queries: g exceeds available queries");
    if (range.empty())
        throw DataError("select_top_queries: empty range");
    std::vector<std::pair<double, std::string>> scored;
    scored.reserve(panel.num_queries());
    for (std::size_t q = 0; q < panel.num_queries(); ++q) {
        auto qs = panel.query_series(q, range);
        double best = -std::numeric_limits<double>::infinity();
        for (std::size_t l = 0; l < panel.num_locations(); ++l) {
            try {
                best = std::max(best, pearson(qs, panel.incidence_series(l, range)));
            } catch (const ModelError&) {
                // constant series: correlation undefined, skip
            }
        }
        scored.emplace_back(best, panel.query_ids[q]);
    }
    std::stable_sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    std::vector<std::string> out;
    out.reserve(g);
    for (std::size_t i = 0; i < g; ++i) out.push_back(scored[i].second);
    return out;
}

} // namespace flucast

#endif
