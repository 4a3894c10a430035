#ifndef FLUCAST_STATS_HPP
#define FLUCAST_STATS_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "flucast/errors.hpp"

namespace flucast {

inline double rmse(std::span<const double> predicted, std::span<const double> actual) {
    if (predicted.empty() || predicted.size() != actual.size())
        throw ModelError("rmse: lists must be nonempty and of equal length");
    double acc = 0.0;
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        double d = predicted[i] - actual[i];
        acc += d * d;
    }
    return std::sqrt(acc / static_cast<double>(predicted.size()));
}

/// Product-moment correlation. Errors on constant input rather than
/// returning NaN; callers that want a ranking score handle that case.
inline double pearson(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size())
        throw ModelError("pearson: length mismatch");
    const std::size_t n = a.size();
    if (n < 2)
        throw ModelError("pearson: need at least 2 points");
    double ma = std::accumulate(a.begin(), a.end(), 0.0) / static_cast<double>(n);
    double mb = std::accumulate(b.begin(), b.end(), 0.0) / static_cast<double>(n);
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double da = a[i] - ma;
        double db = b[i] - mb;
        sab += da * db;
        saa += da * da;
        sbb += db * db;
    }
    if (saa == 0.0 || sbb == 0.0)
        throw ModelError("pearson: zero variance");
    return sab / std::sqrt(saa * sbb);
}

struct WilcoxonResult {
    double w_statistic = 0.0; // min(W+, W-)
    double p_value = 1.0;     // two-sided
    std::size_t n_effective = 0;
    std::string method;       // "exact" | "normal-approximation"
};

namespace detail {

// P(W+ <= w) under the null, via the classic rank-sum count recursion.
// Valid only for integer ranks 1..n (no ties among |d|).
inline double wilcoxon_exact_cdf(std::size_t n, double w) {
    const std::size_t max_sum = n * (n + 1) / 2;
    std::vector<double> count(max_sum + 1, 0.0);
    count[0] = 1.0;
    for (std::size_t r = 1; r <= n; ++r)
        for (std::size_t s = max_sum; s >= r; --s)
            count[s] += count[s - r];
    const double total = std::ldexp(1.0, static_cast<int>(n)); // 2^n
    double acc = 0.0;
    std::size_t limit = static_cast<std::size_t>(std::floor(w + 1e-9));
    limit = std::min(limit, max_sum);
    for (std::size_t s = 0; s <= limit; ++s)
        acc += count[s];
    return acc / total;
}

inline double std_normal_cdf(double z) {
    return 0.5 * std::erfc(-z / std::sqrt(2.0));
}

} // namespace detail

enum class WilcoxonMethod { automatic, exact, normal };

/// Paired signed-rank test on d_i = a_i - b_i. Zero differences are
/// dropped; |d| ranked ascending with average ranks for ties. The
/// reported statistic is min(W+, W-), so its attainable maximum is
/// n_eff(n_eff+1)/4. `method` defaults to exact enumeration for
/// n_eff <= 25 with untied |d|, normal approximation otherwise.
inline WilcoxonResult wilcoxon_signed_rank(std::span<const double> a,
                                           std::span<const double> b,
                                           WilcoxonMethod method = WilcoxonMethod::automatic) {
    if (a.size() != b.size())
        throw ModelError("wilcoxon: length mismatch");
    std::vector<double> diffs;
    diffs.reserve(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        double d = a[i] - b[i];
        if (d != 0.0) diffs.push_back(d);
    }
    const std::size_t n = diffs.size();
    if (n == 0)
        throw ModelError("wilcoxon: all differences are zero, no decision possible");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
        return std::abs(diffs[i]) < std::abs(diffs[j]);
    });

    std::vector<double> rank(n, 0.0);
    bool has_ties = false;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n &&
               std::abs(diffs[order[j + 1]]) == std::abs(diffs[order[i]]))
            ++j;
        if (j > i) has_ties = true;
        double avg = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
        for (std::size_t k = i; k <= j; ++k)
            rank[order[k]] = avg;
        i = j + 1;
    }

    double w_plus = 0.0, w_minus = 0.0;
    for (std::size_t k = 0; k < n; ++k)
        (diffs[k] > 0.0 ? w_plus : w_minus) += rank[k];

    WilcoxonResult res;
    res.n_effective = n;
    res.w_statistic = std::min(w_plus, w_minus);

    bool use_exact = (method == WilcoxonMethod::automatic)
                         ? (n <= 25 && !has_ties)
                         : (method == WilcoxonMethod::exact);
    if (use_exact && has_ties)
        throw ModelError("wilcoxon: exact method requires untied |d|");
    if (use_exact) {
        res.method = "exact";
        double p = 2.0 * detail::wilcoxon_exact_cdf(n, res.w_statistic);
        res.p_value = std::min(1.0, p);
    } else {
        res.method = "normal-approximation";
        const double nd = static_cast<double>(n);
        double mean = nd * (nd + 1.0) / 4.0;
        double var = nd * (nd + 1.0) * (2.0 * nd + 1.0) / 24.0;
        // tie correction: subtract sum(t^3 - t)/48 over tie groups
        i = 0;
        while (i < n) {
            std::size_t j = i;
            while (j + 1 < n &&
                   std::abs(diffs[order[j + 1]]) == std::abs(diffs[order[i]]))
                ++j;
            double t = static_cast<double>(j - i + 1);
            if (t > 1.0) var -= (t * t * t - t) / 48.0;
            i = j + 1;
        }
        if (var <= 0.0)
            throw ModelError("wilcoxon: degenerate variance under ties");
        double z = (res.w_statistic - mean + 0.5) / std::sqrt(var);
        double p = 2.0 * detail::std_normal_cdf(z);
        res.p_value = std::min(1.0, p);
    }
    return res;
}

} // namespace flucast

#endif
