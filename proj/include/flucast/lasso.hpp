#ifndef FLUCAST_LASSO_HPP
#define FLUCAST_LASSO_HPP

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "flucast/errors.hpp"

namespace flucast {

/// L1-regularized linear model with an unpenalized intercept, fit by
/// cyclic coordinate descent on (1/(2n))||y - Xb - b0||^2 + lambda*||b||_1.
struct LinearModel {
    std::vector<double> coefficients;
    double intercept = 0.0;
    double lambda = 0.0;
    bool converged = false;
    std::size_t iterations = 0;
};

inline double soft_threshold(double z, double gamma) {
    if (z > gamma) return z - gamma;
    if (z < -gamma) return z + gamma;
    return 0.0;
}

inline double lasso_objective(const std::vector<std::vector<double>>& x,
                              std::span<const double> y, const LinearModel& model) {
    const std::size_t n = y.size();
    double rss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double pred = model.intercept;
        for (std::size_t j = 0; j < model.coefficients.size(); ++j)
            pred += model.coefficients[j] * x[i][j];
        double r = y[i] - pred;
        rss += r * r;
    }
    double l1 = 0.0;
    for (double b : model.coefficients) l1 += std::abs(b);
    return rss / (2.0 * static_cast<double>(n)) + model.lambda * l1;
}

/// Cyclic coordinate descent. Stops when the largest absolute coefficient
/// change over a full sweep drops below tol, or after max_iter sweeps.
/// Features are used as given (no internal standardization).
inline LinearModel fit_lasso(const std::vector<std::vector<double>>& x,
                             std::span<const double> y, double lambda,
                             double tol = 1e-6, std::size_t max_iter = 1000) {
    const std::size_t n = y.size();
    if (n == 0)
        throw ModelError("fit_lasso: empty training set");
    if (x.size() != n)
        throw ModelError("fit_lasso: X rows do not match y length");
    const std::size_t p = x.empty() ? 0 : x[0].size();
    for (const auto& row : x)
        if (row.size() != p)
            throw ModelError("fit_lasso: ragged design matrix");

    LinearModel model;
    model.lambda = lambda;
    model.coefficients.assign(p, 0.0);

    // column squared norms scaled by 1/n
    std::vector<double> col_sq(p, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < p; ++j)
            col_sq[j] += x[i][j] * x[i][j];
    for (auto& v : col_sq) v /= static_cast<double>(n);

    // residual r = y - Xb - b0, maintained incrementally
    double y_mean = 0.0;
    for (double v : y) y_mean += v;
    y_mean /= static_cast<double>(n);
    model.intercept = y_mean;
    std::vector<double> residual(n);
    for (std::size_t i = 0; i < n; ++i)
        residual[i] = y[i] - model.intercept;

    for (std::size_t sweep = 0; sweep < max_iter; ++sweep) {
        double max_delta = 0.0;
        for (std::size_t j = 0; j < p; ++j) {
            if (col_sq[j] == 0.0) continue; // constant-zero column carries no signal
            double rho = 0.0;
            for (std::size_t i = 0; i < n; ++i)
                rho += x[i][j] * residual[i];
            rho = rho / static_cast<double>(n) + col_sq[j] * model.coefficients[j];
            double updated = soft_threshold(rho, lambda) / col_sq[j];
            double delta = updated - model.coefficients[j];
            if (delta != 0.0) {
                for (std::size_t i = 0; i < n; ++i)
                    residual[i] -= delta * x[i][j];
                model.coefficients[j] = updated;
                max_delta = std::max(max_delta, std::abs(delta));
            }
        }
        // closed-form intercept refresh
        double mean_r = 0.0;
        for (double r : residual) mean_r += r;
        mean_r /= static_cast<double>(n);
        if (mean_r != 0.0) {
            model.intercept += mean_r;
            for (auto& r : residual) r -= mean_r;
            max_delta = std::max(max_delta, std::abs(mean_r));
        }
        model.iterations = sweep + 1;
        if (max_delta < tol) {
            model.converged = true;
            break;
        }
    }
    return model;
}

inline double predict_linear(const LinearModel& model, std::span<const double> x) {
    if (x.size() != model.coefficients.size())
        throw ModelError("predict_linear: dimension mismatch");
    double out = model.intercept;
    for (std::size_t j = 0; j < x.size(); ++j)
        out += model.coefficients[j] * x[j];
    return out;
}

} // namespace flucast

#endif
