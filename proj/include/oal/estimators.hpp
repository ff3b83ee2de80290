#pragma once

#include <vector>

#include "oal/numerics.hpp"

namespace oal {

enum class FitMethod { ols, ridge, lasso };

/// A fitted linear model. `coefficients` always has the ambient dimension of
/// the design it was fitted on; support-restricted fits are embedded with
/// zeros off-support via `embed`.
struct LinearFit {
  Vector coefficients;
  FitMethod method = FitMethod::ols;
  double lambda = 0.0;
  long design_rows = 0;
  std::vector<int> dims_used;  // empty means all dimensions
  bool converged = true;

  /// Embed a support-restricted fit into `ambient_dim` coordinates.
  Vector embed(int ambient_dim) const;
};

/// The ground-truth generating model y = x^T beta + eps, eps ~ N(0, sigma^2).
struct LinearModel {
  Vector beta;
  double noise_sigma = 1.0;

  std::vector<int> support(double tol = 0.0) const;
};

/// OLS via the normal equations; the Gram matrix must pass the SPD criterion.
LinearFit fit_ols(const Matrix& X, const Vector& y);

/// Ridge closed form (X^T X + lambda I)^{-1} X^T y. lambda = 0 delegates to OLS.
LinearFit fit_ridge(const Matrix& X, const Vector& y, double lambda);

/// Lasso on the objective (1/2k)||y - X beta||^2 + lambda ||beta||_1 by cyclic
/// coordinate descent; inactive coordinates are exact zeros. Non-convergence
/// at the sweep cap sets converged = false rather than throwing.
LinearFit fit_lasso(const Matrix& X, const Vector& y, double lambda);

/// Regularization rule sqrt(16 sigma^2 log(d) / k1) of the two-stage algorithm.
double lasso_regularization(double sigma, int d, long k1);

/// Upper bound f(lambda_min) on E||beta_hat_lambda - beta||^2 when the ridge
/// penalty is drawn uniformly from [0, R]. Continuous extension at
/// lambda_min = 0 (bias term -> ||beta||^2).
double ridge_mse_bound(double lambda_min, double R, double sigma, int d,
                       double beta_norm_sq);

}  // namespace oal
