#include <cmath>

#include "doctest.h"
#include "oal/estimators.hpp"
#include "oal/rng.hpp"

using namespace oal;

namespace {

Matrix gaussian_rows(long n, int d, Rng& rng) {
  Matrix x(n, d);
  for (long i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) x(i, j) = rng.normal();
  return x;
}

// Independent oracle: plain gradient descent on 0.5||y - Xb||^2 + 0.5 l ||b||^2
// with a conservative step size, run to tight stationarity.
Vector ridge_gd_oracle(const Matrix& X, const Vector& y, double lambda) {
  const int d = static_cast<int>(X.cols());
  const Matrix gram = X.transpose() * X;
  const Vector xty = X.transpose() * y;
  double lipschitz = lambda;
  for (int j = 0; j < d; ++j) lipschitz += gram.row(j).cwiseAbs().sum();
  const double step = 1.0 / lipschitz;
  Vector b = Vector::Zero(d);
  for (int it = 0; it < 200000; ++it) {
    const Vector grad = gram * b - xty + lambda * b;
    if (grad.cwiseAbs().maxCoeff() < 1e-11) break;
    b -= step * grad;
  }
  return b;
}

// Independent oracle: proximal gradient (ISTA) on (1/2k)||y-Xb||^2 + l||b||_1.
Vector lasso_ista_oracle(const Matrix& X, const Vector& y, double lambda) {
  const int d = static_cast<int>(X.cols());
  const auto k = static_cast<double>(X.rows());
  const Matrix gram = X.transpose() * X / k;
  const Vector xty = X.transpose() * y / k;
  double lipschitz = 0.0;
  for (int j = 0; j < d; ++j) {
    lipschitz = std::max(lipschitz, gram.row(j).cwiseAbs().sum());
  }
  const double step = 1.0 / lipschitz;
  Vector b = Vector::Zero(d);
  for (int it = 0; it < 500000; ++it) {
    const Vector z = b - step * (gram * b - xty);
    Vector next(d);
    for (int j = 0; j < d; ++j) {
      const double t = lambda * step;
      next(j) = z(j) > t ? z(j) - t : (z(j) < -t ? z(j) + t : 0.0);
    }
    if ((next - b).cwiseAbs().maxCoeff() < 1e-12) {
      b = next;
      break;
    }
    b = next;
  }
  return b;
}

double lasso_objective(const Matrix& X, const Vector& y, const Vector& b,
                       double lambda) {
  const auto k = static_cast<double>(X.rows());
  return (y - X * b).squaredNorm() / (2.0 * k) + lambda * b.lpNorm<1>();
}

}  // namespace

TEST_CASE("OLS on a 1-d exact-fit instance") {
  Matrix X(2, 1);
  X << 1, 2;
  Vector y(2);
  y << 2, 4;
  const auto fit = fit_ols(X, y);
  CHECK(fit.coefficients(0) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(fit.design_rows == 2);
}

TEST_CASE("OLS recovers a noiseless model") {
  Rng rng(41);
  const Matrix X = gaussian_rows(30, 6, rng);
  Vector beta(6);
  beta << 1, -2, 0, 3.5, 0.25, -1;
  const auto fit = fit_ols(X, X * beta);
  CHECK((fit.coefficients - beta).cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("OLS rejects underdetermined and singular designs") {
  Rng rng(42);
  CHECK_THROWS_AS(fit_ols(gaussian_rows(4, 5, rng), Vector::Zero(4)),
                  RankError);
  Matrix X(10, 2);
  for (long i = 0; i < 10; ++i) {
    X(i, 0) = rng.normal();
    X(i, 1) = 2.0 * X(i, 0);
  }
  CHECK_THROWS_AS(fit_ols(X, Vector::Zero(10)), RankError);
}

TEST_CASE("OLS matches a gradient-descent oracle on 50 random instances") {
  Rng rng(43);
  for (int trial = 0; trial < 50; ++trial) {
    const Matrix X = gaussian_rows(50, 5, rng);
    Vector y(50);
    for (int i = 0; i < 50; ++i) y(i) = rng.normal() * 2.0 + rng.uniform(-1, 1);
    const auto fit = fit_ols(X, y);
    const Vector oracle = ridge_gd_oracle(X, y, 0.0);
    CHECK((fit.coefficients - oracle).cwiseAbs().maxCoeff() <= 1e-5);
  }
}

TEST_CASE("ridge matches the gradient-descent oracle") {
  Rng rng(44);
  for (int trial = 0; trial < 50; ++trial) {
    const Matrix X = gaussian_rows(40, 5, rng);
    Vector y(40);
    for (int i = 0; i < 40; ++i) y(i) = rng.normal();
    const double lambda = rng.uniform(0.1, 10.0);
    const auto fit = fit_ridge(X, y, lambda);
    const Vector oracle = ridge_gd_oracle(X, y, lambda);
    CHECK((fit.coefficients - oracle).cwiseAbs().maxCoeff() <= 1e-5);
  }
}

TEST_CASE("ridge converges to OLS as lambda -> 0") {
  Rng rng(45);
  const Matrix X = gaussian_rows(60, 4, rng);
  Vector y(60);
  for (int i = 0; i < 60; ++i) y(i) = rng.normal();
  const auto ols = fit_ols(X, y);
  for (double lambda : {1e-6, 1e-8, 1e-10}) {
    const auto fit = fit_ridge(X, y, lambda);
    CHECK((fit.coefficients - ols.coefficients).cwiseAbs().maxCoeff() <= 1e-5);
  }
  CHECK(fit_ridge(X, y, 0.0).method == FitMethod::ols);
}

TEST_CASE("ridge at huge lambda shrinks to zero") {
  Rng rng(46);
  const Matrix X = gaussian_rows(50, 3, rng);
  Vector y(50);
  for (int i = 0; i < 50; ++i) y(i) = rng.uniform(-1, 1);
  const auto fit = fit_ridge(X, y, 1e12);
  CHECK(fit.coefficients.norm() <= 1e-6);
}

TEST_CASE("lasso with lambda = 0 equals OLS") {
  Rng rng(47);
  const Matrix X = gaussian_rows(50, 4, rng);
  Vector y(50);
  for (int i = 0; i < 50; ++i) y(i) = rng.normal();
  const auto lasso = fit_lasso(X, y, 0.0);
  const auto ols = fit_ols(X, y);
  CHECK((lasso.coefficients - ols.coefficients).cwiseAbs().maxCoeff() <= 1e-6);
}

TEST_CASE("lasso soft-thresholds on an orthonormal design") {
  // Columns orthogonal with X^T X / k = I (scaled Hadamard-type design).
  const long k = 4;
  Matrix X(k, 2);
  X << 1, 1, 1, -1, -1, 1, -1, -1;
  Vector beta_ols(2);
  beta_ols << 1.0, -0.4;
  const Vector y = X * beta_ols;
  const auto fit = fit_lasso(X, y, 0.3);
  CHECK(fit.coefficients(0) == doctest::Approx(0.7).epsilon(1e-9));
  CHECK(fit.coefficients(1) == doctest::Approx(-0.1).epsilon(1e-9));

  // Cross-check the first coordinate against a brute-force 1-d grid.
  double best = 0.0, best_obj = 1e300;
  for (int i = -2000; i <= 2000; ++i) {
    const double b = i / 1000.0;
    Vector cand(2);
    cand << b, fit.coefficients(1);
    const double obj = lasso_objective(X, y, cand, 0.3);
    if (obj < best_obj) {
      best_obj = obj;
      best = b;
    }
  }
  CHECK(std::abs(best - 0.7) <= 1e-3);
}

TEST_CASE("lasso is exactly zero above the critical lambda") {
  Rng rng(48);
  const Matrix X = gaussian_rows(30, 5, rng);
  Vector y(30);
  for (int i = 0; i < 30; ++i) y(i) = rng.normal();
  const double critical = (X.transpose() * y / 30.0).cwiseAbs().maxCoeff();
  const auto fit = fit_lasso(X, y, critical * 1.0001);
  CHECK(fit.coefficients.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("lasso matches an ISTA oracle on 50 random instances") {
  Rng rng(49);
  for (int trial = 0; trial < 50; ++trial) {
    const Matrix X = gaussian_rows(40, 6, rng);
    Vector beta = Vector::Zero(6);
    beta(0) = 2.0;
    beta(3) = -1.5;
    Vector y = X * beta;
    for (int i = 0; i < 40; ++i) y(i) += 0.5 * rng.normal();
    const double lambda = rng.uniform(0.05, 0.5);
    const auto fit = fit_lasso(X, y, lambda);
    const Vector oracle = lasso_ista_oracle(X, y, lambda);
    CHECK(lasso_objective(X, y, fit.coefficients, lambda) <=
          lasso_objective(X, y, oracle, lambda) + 1e-8);
    CHECK((fit.coefficients - oracle).cwiseAbs().maxCoeff() <= 1e-5);
  }
}

TEST_CASE("lasso KKT residuals") {
  Rng rng(50);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix X = gaussian_rows(35, 5, rng);
    Vector y(35);
    for (int i = 0; i < 35; ++i) y(i) = rng.normal() * 2.0;
    const double lambda = rng.uniform(0.05, 0.4);
    const auto fit = fit_lasso(X, y, lambda);
    const Vector corr =
        X.transpose() * (y - X * fit.coefficients) / 35.0;
    for (int j = 0; j < 5; ++j) {
      if (fit.coefficients(j) == 0.0) {
        CHECK(std::abs(corr(j)) <= lambda + 1e-6);
      } else {
        const double sign = fit.coefficients(j) > 0 ? 1.0 : -1.0;
        CHECK(corr(j) == doctest::Approx(lambda * sign).epsilon(1e-6));
      }
    }
  }
}

TEST_CASE("lasso regularization rule of the two-stage algorithm") {
  CHECK(lasso_regularization(1.0, 100, 110) ==
        doctest::Approx(std::sqrt(16.0 * std::log(100.0) / 110.0)));
  CHECK(lasso_regularization(2.0, 50, 64) ==
        doctest::Approx(2.0 * lasso_regularization(1.0, 50, 64)));
  CHECK_THROWS_AS(lasso_regularization(1.0, 1, 10), DomainError);
}

TEST_CASE("ridge MSE bound shape") {
  const double sigma = 1.0;
  const int d = 5;
  const double R = 10.0;
  const double beta_sq = 7.0;
  // lambda_min = 0: continuous extension sigma^2 d / R + ||beta||^2.
  CHECK(ridge_mse_bound(0.0, R, sigma, d, beta_sq) ==
        doctest::Approx(sigma * sigma * d / R + beta_sq).epsilon(1e-12));
  // Vanishes as lambda_min grows.
  CHECK(ridge_mse_bound(1e9, R, sigma, d, beta_sq) < 1e-6);
  // Nonincreasing on a grid.
  double prev = 1e300;
  for (double lm : {0.0, 0.5, 1.0, 2.0, 5.0, 20.0, 100.0}) {
    const double f = ridge_mse_bound(lm, R, sigma, d, beta_sq);
    CHECK(f <= prev + 1e-12);
    prev = f;
  }
}

TEST_CASE("embed places restricted coefficients on their support") {
  LinearFit fit;
  fit.coefficients = Vector::Ones(2);
  fit.coefficients(1) = -2.0;
  fit.dims_used = {1, 3};
  const Vector full = fit.embed(5);
  CHECK(full(1) == doctest::Approx(1.0));
  CHECK(full(3) == doctest::Approx(-2.0));
  CHECK(full(0) == 0.0);
  CHECK(full(2) == 0.0);
  CHECK(full(4) == 0.0);
}

TEST_CASE("LinearModel support extraction") {
  LinearModel model;
  model.beta = Vector::Zero(6);
  model.beta(1) = 0.5;
  model.beta(4) = -3.0;
  const auto s = model.support();
  REQUIRE(s.size() == 2);
  CHECK(s[0] == 1);
  CHECK(s[1] == 4);
}
