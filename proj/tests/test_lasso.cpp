#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <limits>
#include <vector>

#include "flucast/lasso.hpp"
#include "flucast/rng.hpp"

using namespace flucast;

namespace {

// Independent proximal-gradient (FISTA) oracle for
// (1/(2n))||y - Xb - b0||^2 + lambda*||b||_1 with unpenalized intercept.
LinearModel prox_gradient_oracle(const std::vector<std::vector<double>>& x,
                                 const std::vector<double>& y, double lambda,
                                 double tol = 1e-10, std::size_t max_iter = 500000) {
    const std::size_t n = y.size();
    const std::size_t p = x[0].size();
    // Lipschitz bound: largest eigenvalue of (1/n) [X 1]^T [X 1] via power iteration
    std::vector<std::vector<double>> xa(n, std::vector<double>(p + 1, 1.0));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < p; ++j)
            xa[i][j] = x[i][j];
    std::vector<double> v(p + 1, 1.0);
    double lip = 1.0;
    for (int it = 0; it < 200; ++it) {
        std::vector<double> xv(n, 0.0);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j <= p; ++j)
                xv[i] += xa[i][j] * v[j];
        std::vector<double> w(p + 1, 0.0);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j <= p; ++j)
                w[j] += xa[i][j] * xv[i] / static_cast<double>(n);
        double norm = 0.0;
        for (double a : w) norm += a * a;
        norm = std::sqrt(norm);
        lip = norm;
        for (auto& a : w) a /= norm;
        v = w;
    }
    double step = 1.0 / (lip * 1.01);

    std::vector<double> beta(p + 1, 0.0), z(p + 1, 0.0);
    double momentum = 1.0;
    for (std::size_t it = 0; it < max_iter; ++it) {
        // gradient of smooth part at z
        std::vector<double> resid(n);
        for (std::size_t i = 0; i < n; ++i) {
            double pred = 0.0;
            for (std::size_t j = 0; j <= p; ++j)
                pred += xa[i][j] * z[j];
            resid[i] = pred - y[i];
        }
        std::vector<double> next(p + 1);
        double max_change = 0.0;
        for (std::size_t j = 0; j <= p; ++j) {
            double grad = 0.0;
            for (std::size_t i = 0; i < n; ++i)
                grad += xa[i][j] * resid[i];
            grad /= static_cast<double>(n);
            double cand = z[j] - step * grad;
            next[j] = j < p ? soft_threshold(cand, step * lambda) : cand;
            max_change = std::max(max_change, std::abs(next[j] - beta[j]));
        }
        double next_momentum = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * momentum * momentum));
        for (std::size_t j = 0; j <= p; ++j)
            z[j] = next[j] + (momentum - 1.0) / next_momentum * (next[j] - beta[j]);
        beta = next;
        momentum = next_momentum;
        if (max_change < tol) break;
    }
    LinearModel m;
    m.lambda = lambda;
    m.coefficients.assign(beta.begin(), beta.begin() + static_cast<std::ptrdiff_t>(p));
    m.intercept = beta[p];
    return m;
}

// dense least squares via normal equations + Gaussian elimination
std::vector<double> least_squares(const std::vector<std::vector<double>>& x,
                                  const std::vector<double>& y) {
    const std::size_t n = y.size();
    const std::size_t p = x[0].size() + 1; // with intercept column
    std::vector<std::vector<double>> a(p, std::vector<double>(p + 1, 0.0));
    auto cell = [&](std::size_t i, std::size_t j) {
        return j < p - 1 ? x[i][j] : 1.0;
    };
    for (std::size_t r = 0; r < p; ++r) {
        for (std::size_t c = 0; c < p; ++c)
            for (std::size_t i = 0; i < n; ++i)
                a[r][c] += cell(i, r) * cell(i, c);
        for (std::size_t i = 0; i < n; ++i)
            a[r][p] += cell(i, r) * y[i];
    }
    for (std::size_t col = 0; col < p; ++col) {
        std::size_t pivot = col;
        for (std::size_t r = col + 1; r < p; ++r)
            if (std::abs(a[r][col]) > std::abs(a[pivot][col])) pivot = r;
        std::swap(a[col], a[pivot]);
        for (std::size_t r = 0; r < p; ++r) {
            if (r == col) continue;
            double f = a[r][col] / a[col][col];
            for (std::size_t c = col; c <= p; ++c)
                a[r][c] -= f * a[col][c];
        }
    }
    std::vector<double> beta(p);
    for (std::size_t j = 0; j < p; ++j)
        beta[j] = a[j][p] / a[j][j];
    return beta; // [coefficients..., intercept]
}

} // namespace

TEST_CASE("soft_threshold") {
    CHECK(soft_threshold(3.0, 1.0) == 2.0);
    CHECK(soft_threshold(-0.5, 1.0) == 0.0);
    CHECK(soft_threshold(-3.0, 1.0) == -2.0);
    CHECK(soft_threshold(0.0, 0.0) == 0.0);
}

TEST_CASE("fit_lasso exact interpolation at lambda=0") {
    std::vector<std::vector<double>> x{{1.0}, {2.0}, {3.0}};
    std::vector<double> y{2.0, 4.0, 6.0};
    auto model = fit_lasso(x, y, 0.0, 1e-10, 10000);
    CHECK(model.converged);
    CHECK_THAT(model.coefficients[0], Catch::Matchers::WithinAbs(2.0, 1e-8));
    CHECK_THAT(model.intercept, Catch::Matchers::WithinAbs(0.0, 1e-8));

    // prediction composition
    CHECK_THAT(predict_linear(model, std::vector<double>{4.0}),
               Catch::Matchers::WithinAbs(8.0, 1e-7));
}

TEST_CASE("predict_linear basics") {
    LinearModel m;
    m.coefficients = {0.0, 0.0};
    m.intercept = 3.0;
    CHECK(predict_linear(m, std::vector<double>{7.0, -2.0}) == 3.0);
    m.coefficients = {2.0};
    m.intercept = 0.0;
    CHECK(predict_linear(m, std::vector<double>{5.0}) == 10.0);
    CHECK_THROWS_AS(predict_linear(m, std::vector<double>{1.0, 2.0}), ModelError);
}

TEST_CASE("full shrinkage above the critical lambda") {
    Rng rng = make_rng(5);
    std::vector<std::vector<double>> x;
    std::vector<double> y;
    for (int i = 0; i < 25; ++i) {
        x.push_back({rng.normal(), rng.normal(), rng.normal()});
        y.push_back(rng.normal());
    }
    const std::size_t n = y.size();
    double y_mean = 0.0;
    for (double v : y) y_mean += v;
    y_mean /= static_cast<double>(n);
    double lambda_max = 0.0;
    for (std::size_t j = 0; j < 3; ++j) {
        double dot = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            dot += x[i][j] * (y[i] - y_mean);
        lambda_max = std::max(lambda_max, std::abs(dot / static_cast<double>(n)));
    }
    auto model = fit_lasso(x, y, lambda_max * 1.0001);
    for (double b : model.coefficients)
        CHECK(b == 0.0);
    CHECK_THAT(model.intercept, Catch::Matchers::WithinAbs(y_mean, 1e-9));
}

TEST_CASE("coordinate descent matches the proximal-gradient oracle") {
    Rng rng = make_rng(21);
    for (int trial = 0; trial < 5; ++trial) {
        std::vector<std::vector<double>> x;
        std::vector<double> y;
        for (int i = 0; i < 20; ++i) {
            std::vector<double> row;
            for (int j = 0; j < 5; ++j) row.push_back(rng.normal());
            y.push_back(row[0] * 1.5 - row[2] * 0.7 + 0.3 * rng.normal());
            x.push_back(std::move(row));
        }
        auto cd = fit_lasso(x, y, 0.01, 1e-10, 100000);
        auto oracle = prox_gradient_oracle(x, y, 0.01);
        double f_cd = lasso_objective(x, y, cd);
        double f_oracle = lasso_objective(x, y, oracle);
        CHECK(std::abs(f_cd - f_oracle) < 1e-6);
    }
}

TEST_CASE("lambda=0 matches closed-form least squares") {
    Rng rng = make_rng(31);
    std::vector<std::vector<double>> x;
    std::vector<double> y;
    for (int i = 0; i < 20; ++i) {
        std::vector<double> row;
        for (int j = 0; j < 5; ++j) row.push_back(rng.normal());
        y.push_back(row[1] - 2.0 * row[3] + rng.normal());
        x.push_back(std::move(row));
    }
    auto cd = fit_lasso(x, y, 0.0, 1e-12, 200000);
    auto beta = least_squares(x, y);
    for (std::size_t j = 0; j < 5; ++j)
        CHECK_THAT(cd.coefficients[j], Catch::Matchers::WithinAbs(beta[j], 1e-6));
    CHECK_THAT(cd.intercept, Catch::Matchers::WithinAbs(beta[5], 1e-6));
}

TEST_CASE("objective is non-increasing across sweeps") {
    Rng rng = make_rng(41);
    std::vector<std::vector<double>> x;
    std::vector<double> y;
    for (int i = 0; i < 30; ++i) {
        std::vector<double> row;
        for (int j = 0; j < 4; ++j) row.push_back(rng.normal());
        y.push_back(row[0] + rng.normal());
        x.push_back(std::move(row));
    }
    double prev = std::numeric_limits<double>::infinity();
    for (std::size_t sweeps = 1; sweeps <= 12; ++sweeps) {
        auto m = fit_lasso(x, y, 0.05, 0.0, sweeps); // tol 0 forces exact sweep count
        double f = lasso_objective(x, y, m);
        CHECK(f <= prev + 1e-12);
        prev = f;
    }
}

TEST_CASE("KKT conditions hold at convergence") {
    Rng rng = make_rng(51);
    const double tol = 1e-8, lambda = 0.02;
    std::vector<std::vector<double>> x;
    std::vector<double> y;
    for (int i = 0; i < 40; ++i) {
        std::vector<double> row;
        for (int j = 0; j < 6; ++j) row.push_back(rng.normal());
        y.push_back(row[0] - row[4] + 0.5 * rng.normal());
        x.push_back(std::move(row));
    }
    auto m = fit_lasso(x, y, lambda, tol, 100000);
    REQUIRE(m.converged);
    const std::size_t n = y.size();
    std::vector<double> resid(n);
    for (std::size_t i = 0; i < n; ++i)
        resid[i] = y[i] - predict_linear(m, x[i]);
    for (std::size_t j = 0; j < 6; ++j) {
        double g = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            g += x[i][j] * resid[i];
        g /= static_cast<double>(n);
        if (m.coefficients[j] != 0.0) {
            double sign = m.coefficients[j] > 0.0 ? 1.0 : -1.0;
            CHECK(std::abs(g - lambda * sign) <= 10.0 * tol);
        } else {
            CHECK(std::abs(g) <= lambda + 10.0 * tol);
        }
    }
}

TEST_CASE("solution is invariant under feature permutation") {
    Rng rng = make_rng(61);
    std::vector<std::vector<double>> x;
    std::vector<double> y;
    for (int i = 0; i < 25; ++i) {
        std::vector<double> row;
        for (int j = 0; j < 4; ++j) row.push_back(rng.normal());
        y.push_back(row[2] + rng.normal() * 0.2);
        x.push_back(std::move(row));
    }
    auto base = fit_lasso(x, y, 0.01, 1e-10, 100000);
    std::vector<std::size_t> perm{2, 0, 3, 1};
    std::vector<std::vector<double>> xp;
    for (const auto& row : x) {
        std::vector<double> r;
        for (std::size_t j : perm) r.push_back(row[j]);
        xp.push_back(std::move(r));
    }
    auto permuted = fit_lasso(xp, y, 0.01, 1e-10, 100000);
    for (std::size_t j = 0; j < perm.size(); ++j)
        CHECK_THAT(permuted.coefficients[j],
                   Catch::Matchers::WithinAbs(base.coefficients[perm[j]], 1e-8));
    CHECK_THAT(permuted.intercept, Catch::Matchers::WithinAbs(base.intercept, 1e-8));
}

TEST_CASE("fit_lasso input validation") {
    CHECK_THROWS_AS(fit_lasso({}, std::vector<double>{}, 0.1), ModelError);
    CHECK_THROWS_AS(fit_lasso({{1.0}}, std::vector<double>{1.0, 2.0}, 0.1), ModelError);
}
