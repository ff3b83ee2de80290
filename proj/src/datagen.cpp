#include "oal/datagen.hpp"

#include <cmath>
#include <string>

#include "oal/whitening.hpp"

namespace oal {

DistributionSpec DistributionSpec::white_gaussian(int d) {
  return {DistributionKind::gaussian, d, std::nullopt};
}

DistributionSpec DistributionSpec::gaussian(const SymMatrix& sigma) {
  return {DistributionKind::gaussian, sigma.dim(), sigma};
}

DistributionSpec DistributionSpec::laplace_copula(const SymMatrix& corr) {
  return {DistributionKind::laplace_copula, corr.dim(), corr};
}

DistributionSpec DistributionSpec::uniform_white(int d) {
  return {DistributionKind::uniform_white, d, std::nullopt};
}

SymMatrix DistributionSpec::covariance_or_identity() const {
  return covariance ? *covariance : SymMatrix::identity(dim);
}

namespace {

// Inverse CDF of the zero-mean unit-variance Laplace distribution
// (scale b = 1/sqrt(2)).
double laplace_unit_quantile(double u) {
  const double b = 1.0 / std::sqrt(2.0);
  const double centered = u - 0.5;
  const double sign = centered >= 0 ? 1.0 : -1.0;
  return -b * sign * std::log1p(-2.0 * std::abs(centered));
}

Matrix correlated_gaussian(const SymMatrix& sigma, long n, Rng& rng) {
  const int d = sigma.dim();
  const EigDecomposition eig = eig_sym(sigma);
  if (!is_spd(eig)) {
    throw RankError("sample_observations: covariance must be SPD");
  }
  const Matrix factor =
      eig.eigenvectors * eig.eigenvalues.cwiseSqrt().asDiagonal();
  Matrix rows(n, d);
  Vector z(d);
  for (long i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) z(j) = rng.normal();
    rows.row(i) = (factor * z).transpose();
  }
  return rows;
}

}  // namespace

Matrix sample_observations(const DistributionSpec& spec, long n, Rng& rng) {
  if (n < 1) throw DomainError("sample_observations: n must be positive");
  const int d = spec.dim;
  switch (spec.kind) {
    case DistributionKind::gaussian:
      if (!spec.covariance) {
        Matrix rows(n, d);
        for (long i = 0; i < n; ++i)
          for (int j = 0; j < d; ++j) rows(i, j) = rng.normal();
        return rows;
      }
      return correlated_gaussian(*spec.covariance, n, rng);
    case DistributionKind::laplace_copula: {
      Matrix gauss = spec.covariance
                         ? correlated_gaussian(*spec.covariance, n, rng)
                         : sample_observations(
                               DistributionSpec::white_gaussian(d), n, rng);
      // Per-coordinate standard deviations of the copula correlation; the
      // Gaussian marginals must be standardized before applying Phi.
      Vector sd = Vector::Ones(d);
      if (spec.covariance) {
        sd = spec.covariance->mat().diagonal().cwiseSqrt();
      }
      for (long i = 0; i < n; ++i) {
        for (int j = 0; j < d; ++j) {
          const double u = normal_cdf(gauss(i, j) / sd(j));
          gauss(i, j) = laplace_unit_quantile(u);
        }
      }
      return gauss;
    }
    case DistributionKind::uniform_white: {
      const double half_width = std::sqrt(3.0);  // unit variance
      Matrix rows(n, d);
      for (long i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j)
          rows(i, j) = rng.uniform(-half_width, half_width);
      return rows;
    }
  }
  throw DomainError("sample_observations: unknown distribution kind");
}

LinearModel make_model(int d, int s, double lo, double hi, double sigma,
                       Rng& rng) {
  if (s < 1 || s > d) {
    throw DomainError("make_model: require 1 <= s <= d, got s = " +
                      std::to_string(s) + ", d = " + std::to_string(d));
  }
  // Uniform support subset via a partial Fisher-Yates pass.
  const auto perm = rng.permutation(static_cast<std::size_t>(d));
  LinearModel model;
  model.beta = Vector::Zero(d);
  model.noise_sigma = sigma;
  for (int i = 0; i < s; ++i) {
    double coeff = 0.0;
    while (coeff == 0.0) coeff = rng.uniform(lo, hi);
    model.beta(static_cast<int>(perm[i])) = coeff;
  }
  return model;
}

Vector gen_responses(const Matrix& X, const ResponseSpec& resp, Rng& rng) {
  if (X.cols() != resp.model.beta.size()) {
    throw ShapeError("gen_responses: dimension mismatch");
  }
  if (!std::isfinite(resp.psi)) {
    throw DomainError("gen_responses: psi must be finite");
  }
  Vector y = X * resp.model.beta;
  if (resp.psi != 0.0) {
    y += resp.psi * X.rowwise().squaredNorm();
  }
  if (resp.model.noise_sigma > 0.0) {
    for (long i = 0; i < y.size(); ++i) {
      y(i) += resp.model.noise_sigma * rng.normal();
    }
  }
  return y;
}

SymMatrix random_spd(int d, double lambda_lo, double lambda_hi, Rng& rng) {
  if (!(lambda_lo > 0 && lambda_hi >= lambda_lo)) {
    throw DomainError("random_spd: need 0 < lambda_lo <= lambda_hi");
  }
  // Orthogonalize a Gaussian matrix by Gram-Schmidt for the rotation.
  Matrix g(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) g(i, j) = rng.normal();
  Matrix q = Matrix::Zero(d, d);
  for (int j = 0; j < d; ++j) {
    Vector v = g.col(j);
    for (int i = 0; i < j; ++i) v -= q.col(i).dot(g.col(j)) * q.col(i);
    const double norm = v.norm();
    q.col(j) = norm > 1e-12 ? Vector(v / norm) : Vector::Unit(d, j);
  }
  Vector lambda(d);
  for (int i = 0; i < d; ++i) lambda(i) = rng.uniform(lambda_lo, lambda_hi);
  return SymMatrix(q * lambda.asDiagonal() * q.transpose());
}

}  // namespace oal
