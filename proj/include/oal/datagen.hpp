#pragma once

#include <optional>

#include "oal/estimators.hpp"
#include "oal/numerics.hpp"
#include "oal/rng.hpp"

namespace oal {

enum class DistributionKind { gaussian, laplace_copula, uniform_white };

/// Covariate-generating distribution. `covariance` is the covariance matrix
/// for the Gaussian kind and the copula correlation for the Laplace kind;
/// the uniform kind is always white by construction.
struct DistributionSpec {
  DistributionKind kind = DistributionKind::gaussian;
  int dim = 1;
  std::optional<SymMatrix> covariance;  // absent means identity

  static DistributionSpec white_gaussian(int d);
  static DistributionSpec gaussian(const SymMatrix& sigma);
  static DistributionSpec laplace_copula(const SymMatrix& correlation);
  static DistributionSpec uniform_white(int d);

  SymMatrix covariance_or_identity() const;
};

/// Response model y = x^T beta + psi * ||x||^2 + noise.
struct ResponseSpec {
  LinearModel model;
  double psi = 0.0;
};

/// Draw n rows from the spec. Gaussian rows are Sigma^{1/2} z with iid
/// standard normal z; Laplace rows map correlated Gaussians through Phi and
/// the inverse unit-variance Laplace CDF per coordinate; uniform rows are iid
/// U(-sqrt(3), sqrt(3)).
Matrix sample_observations(const DistributionSpec& spec, long n, Rng& rng);

/// Sparse ground truth: s support indices chosen uniformly, coefficients iid
/// uniform on [lo, hi], zeros elsewhere.
LinearModel make_model(int d, int s, double lo, double hi, double sigma,
                       Rng& rng);

Vector gen_responses(const Matrix& X, const ResponseSpec& resp, Rng& rng);

/// Random SPD matrix with eigenvalues uniform on [lambda_lo, lambda_hi] and a
/// Haar-ish random rotation; used by property suites and synthetic scenarios.
SymMatrix random_spd(int d, double lambda_lo, double lambda_hi, Rng& rng);

}  // namespace oal
