#ifndef FLUCAST_FOREST_HPP
#define FLUCAST_FOREST_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <memory>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "flucast/attribution.hpp"
#include "flucast/errors.hpp"
#include "flucast/rng.hpp"

namespace flucast {

struct ForestParams {
    std::size_t tree_count = 50;
    std::size_t max_depth = 8;
    std::size_t features_per_split = 0; // 0 -> ceil(p/3)
    std::size_t min_samples_leaf = 1;
    bool bootstrap = true;
};

struct TreeNode {
    // internal node when left && right, leaf otherwise
    std::size_t feature = 0;
    double threshold = 0.0;
    double split_gain = 0.0; // total SSE reduction at this split
    std::unique_ptr<TreeNode> left;
    std::unique_ptr<TreeNode> right;
    double prediction = 0.0;
    std::size_t sample_count = 0;

    bool is_leaf() const { return !left; }
};

struct Forest {
    std::vector<std::unique_ptr<TreeNode>> trees;
    ForestParams params;
    std::uint64_t seed = 0;
    std::vector<std::string> feature_names;
};

namespace detail {

struct TreeBuilder {
    const std::vector<std::vector<double>>& x;
    std::span<const double> y;
    const ForestParams& params;
    std::size_t n_features;
    std::size_t mtry;
    std::size_t n_total;
    Rng& rng;

    std::unique_ptr<TreeNode> build(std::vector<std::size_t>& idx, std::size_t depth) {
        auto node = std::make_unique<TreeNode>();
        node->sample_count = idx.size();
        double sum = 0.0;
        for (std::size_t i : idx) sum += y[i];
        node->prediction = sum / static_cast<double>(idx.size());

        if (depth >= params.max_depth || idx.size() < 2 * params.min_samples_leaf)
            return node;

        double parent_sse = 0.0;
        for (std::size_t i : idx) {
            double d = y[i] - node->prediction;
            parent_sse += d * d;
        }
        if (parent_sse <= 0.0)
            return node;

        // per-node random feature subset, iterated in ascending index order
        std::vector<std::size_t> candidates(n_features);
        std::iota(candidates.begin(), candidates.end(), 0);
        if (mtry < n_features) {
            for (std::size_t i = 0; i < mtry; ++i) {
                std::size_t j = i + static_cast<std::size_t>(
                                        rng.below(candidates.size() - i));
                std::swap(candidates[i], candidates[j]);
            }
            candidates.resize(mtry);
            std::sort(candidates.begin(), candidates.end());
        }

        double best_gain = 0.0;
        std::size_t best_feature = 0;
        double best_threshold = 0.0;
        bool found = false;

        std::vector<std::size_t> order(idx);
        for (std::size_t f : candidates) {
            std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
                return x[a][f] < x[b][f];
            });
            // prefix sums over the sorted order
            double left_sum = 0.0, left_sq = 0.0;
            double total_sum = 0.0, total_sq = 0.0;
            for (std::size_t i : order) {
                total_sum += y[i];
                total_sq += y[i] * y[i];
            }
            const std::size_t n = order.size();
            for (std::size_t k = 0; k + 1 < n; ++k) {
                double yi = y[order[k]];
                left_sum += yi;
                left_sq += yi * yi;
                if (x[order[k]][f] == x[order[k + 1]][f])
                    continue; // no midpoint between equal values
                std::size_t n_left = k + 1, n_right = n - n_left;
                if (n_left < params.min_samples_leaf || n_right < params.min_samples_leaf)
                    continue;
                double right_sum = total_sum - left_sum;
                double right_sq = total_sq - left_sq;
                double sse_left = left_sq - left_sum * left_sum / static_cast<double>(n_left);
                double sse_right =
                    right_sq - right_sum * right_sum / static_cast<double>(n_right);
                double gain = parent_sse - sse_left - sse_right;
                // improvement must clear a rounding margin so that exact
                // ties keep the lowest (feature, threshold) regardless of
                // the summation order
                if (gain > best_gain + 1e-12 * parent_sse) {
                    best_gain = gain;
                    best_feature = f;
                    best_threshold = 0.5 * (x[order[k]][f] + x[order[k + 1]][f]);
                    found = true;
                }
            }
        }
        if (!found)
            return node;

        std::vector<std::size_t> left_idx, right_idx;
        for (std::size_t i : idx)
            (x[i][best_feature] <= best_threshold ? left_idx : right_idx).push_back(i);
        if (left_idx.empty() || right_idx.empty())
            return node;

        node->feature = best_feature;
        node->threshold = best_threshold;
        node->split_gain = best_gain;
        node->left = build(left_idx, depth + 1);
        node->right = build(right_idx, depth + 1);
        return node;
    }
};

} // namespace detail

/// CART regression tree: best split by maximal SSE reduction over a
/// per-node random feature subset, thresholds at midpoints between
/// consecutive distinct sorted values, leaves predicting the mean.
inline std::unique_ptr<TreeNode> fit_tree(const std::vector<std::vector<double>>& x,
                                          std::span<const double> y,
                                          const ForestParams& params, Rng& rng) {
    if (x.empty() || y.empty() || x.size() != y.size())
        throw ModelError("fit_tree: empty or mismatched data");
    const std::size_t p = x[0].size();
    std::size_t mtry = params.features_per_split;
    if (mtry == 0)
        mtry = static_cast<std::size_t>(std::ceil(static_cast<double>(p) / 3.0));
    mtry = std::min(mtry, p);
    detail::TreeBuilder builder{x, y, params, p, mtry, x.size(), rng};
    std::vector<std::size_t> idx(x.size());
    std::iota(idx.begin(), idx.end(), 0);
    return builder.build(idx, 0);
}

inline Forest fit_forest(const std::vector<std::vector<double>>& x,
                         std::span<const double> y, const ForestParams& params,
                         std::uint64_t seed,
                         std::vector<std::string> feature_names = {}) {
    if (x.empty() || y.empty() || x.size() != y.size())
        throw ModelError("fit_forest: empty or mismatched data");
    Forest forest;
    forest.params = params;
    forest.seed = seed;
    forest.feature_names = std::move(feature_names);
    Rng root = make_rng(seed);
    const std::size_t n = x.size();
    for (std::size_t t = 0; t < params.tree_count; ++t) {
        Rng tree_rng = root.stream("tree", t);
        if (params.bootstrap) {
            std::vector<std::vector<double>> bx;
            std::vector<double> by;
            bx.reserve(n);
            by.reserve(n);
            for (std::size_t i = 0; i < n; ++i) {
                std::size_t j = static_cast<std::size_t>(tree_rng.below(n));
                bx.push_back(x[j]);
                by.push_back(y[j]);
            }
            forest.trees.push_back(fit_tree(bx, by, params, tree_rng));
        } else {
            forest.trees.push_back(fit_tree(x, y, params, tree_rng));
        }
    }
    return forest;
}

inline double predict_tree(const TreeNode& node, std::span<const double> x) {
    const TreeNode* cur = &node;
    while (!cur->is_leaf())
        cur = x[cur->feature] <= cur->threshold ? cur->left.get() : cur->right.get();
    return cur->prediction;
}

inline double predict_forest(const Forest& forest, std::span<const double> x) {
    if (!forest.feature_names.empty() && x.size() != forest.feature_names.size())
        throw ModelError("predict_forest: dimension mismatch");
    double sum = 0.0;
    for (const auto& t : forest.trees)
        sum += predict_tree(*t, x);
    return sum / static_cast<double>(forest.trees.size());
}

namespace detail {

inline void accumulate_importance(const TreeNode& node, std::size_t n_root,
                                  std::vector<double>& acc) {
    if (node.is_leaf()) return;
    acc[node.feature] += node.split_gain / static_cast<double>(n_root);
    accumulate_importance(*node.left, n_root, acc);
    accumulate_importance(*node.right, n_root, acc);
}

} // namespace detail

/// Mean decrease in impurity, averaged over trees and normalized to sum
/// to 1 (a forest with no splits yields the all-zero map).
inline AttributionMap forest_importances(const Forest& forest, std::size_t n_features) {
    std::vector<double> acc(n_features, 0.0);
    for (const auto& t : forest.trees) {
        std::vector<double> per_tree(n_features, 0.0);
        detail::accumulate_importance(*t, t->sample_count, per_tree);
        for (std::size_t j = 0; j < n_features; ++j)
            acc[j] += per_tree[j];
    }
    for (auto& v : acc) v /= static_cast<double>(forest.trees.size());
    double total = std::accumulate(acc.begin(), acc.end(), 0.0);
    if (total > 0.0)
        for (auto& v : acc) v /= total;

    AttributionMap map;
    map.model_kind = "RF";
    map.row_labels = {"importance"};
    map.col_labels = forest.feature_names.empty()
                         ? std::vector<std::string>(n_features)
                         : forest.feature_names;
    map.values = {acc};
    return map;
}

} // namespace flucast

#endif
