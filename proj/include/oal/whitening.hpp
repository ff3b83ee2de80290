#pragma once

#include <Eigen/Dense>

#include "oal/numerics.hpp"

namespace oal {

enum class CovarianceSource { exact, batch_estimated, online_estimated };

/// The map x -> D^{-1/2} U^T x built from Sigma = U D U^T.
class WhiteningTransform {
 public:
  WhiteningTransform(Matrix rotation, Vector scales, CovarianceSource source);

  static WhiteningTransform identity(int dim);
  /// Factorize a known or estimated covariance matrix.
  static WhiteningTransform from_covariance(const SymMatrix& sigma,
                                            CovarianceSource source);

  int dim() const { return static_cast<int>(scales_.size()); }
  const Matrix& rotation() const { return rotation_; }
  const Vector& scales() const { return scales_; }
  CovarianceSource source() const { return source_; }
  double condition_number() const {
    return scales_.maxCoeff() / scales_.minCoeff();
  }

  Vector apply(const Vector& x) const;
  /// Whiten every row of a row-major dataset: X U D^{-1/2}.
  Matrix apply_rows(const Matrix& rows) const;

 private:
  Matrix rotation_;       // U, orthogonal
  Vector scales_;         // eigenvalues of Sigma, all > 0
  Vector inv_sqrt_;       // D^{-1/2} diagonal
  CovarianceSource source_;
};

/// Streaming sufficient statistics for the sample covariance: running mean
/// plus centered scatter, updated Welford-style in O(d^2) per row. Centers
/// internally; finalizing matches the batch estimate of the ingested prefix.
class OnlineCovarianceState {
 public:
  explicit OnlineCovarianceState(int dim);

  void update(const Vector& x);
  long count() const { return count_; }
  int dim() const { return static_cast<int>(mean_.size()); }
  const Vector& mean() const { return mean_; }

  /// Sample covariance with 1/N normalization. Requires count >= 2.
  SymMatrix covariance() const;
  /// Whitening transform of the current estimate (source = online-estimated).
  WhiteningTransform finalize() const;

 private:
  long count_ = 0;
  Vector mean_;
  Matrix scatter_;  // sum of centered outer products
};

/// Mean-centered, 1/N-normalized sample covariance of a dataset.
SymMatrix sample_covariance(const Matrix& data);

/// Batch covariance fit; requires at least dim + 1 rows and full rank.
WhiteningTransform fit_covariance_batch(const Matrix& data);

inline Vector apply_whitening(const WhiteningTransform& t, const Vector& x) {
  return t.apply(x);
}

}  // namespace oal
