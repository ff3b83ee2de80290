#include "oal/whitening.hpp"

#include <sstream>
#include <string>

namespace oal {

WhiteningTransform::WhiteningTransform(Matrix rotation, Vector scales,
                                       CovarianceSource source)
    : rotation_(std::move(rotation)),
      scales_(std::move(scales)),
      source_(source) {
  if (rotation_.rows() != rotation_.cols() ||
      rotation_.rows() != scales_.size()) {
    throw ShapeError("WhiteningTransform: rotation/scales dimension mismatch");
  }
  if ((scales_.array() <= 0).any()) {
    throw RankError("WhiteningTransform: all scales must be positive");
  }
  inv_sqrt_ = scales_.cwiseSqrt().cwiseInverse();
}

WhiteningTransform WhiteningTransform::identity(int dim) {
  return WhiteningTransform(Matrix::Identity(dim, dim), Vector::Ones(dim),
                            CovarianceSource::exact);
}

WhiteningTransform WhiteningTransform::from_covariance(
    const SymMatrix& sigma, CovarianceSource source) {
  const EigDecomposition eig = eig_sym(sigma);
  if (!is_spd(eig)) {
    std::ostringstream msg;
    msg << "from_covariance: covariance is rank deficient; null directions:";
    const double lmax = eig.eigenvalues(0);
    for (int i = 0; i < eig.eigenvalues.size(); ++i) {
      if (eig.eigenvalues(i) <= kSpdRelTol * lmax) {
        msg << " [" << eig.eigenvectors.col(i).transpose() << "]";
      }
    }
    throw RankError(msg.str());
  }
  return WhiteningTransform(eig.eigenvectors, eig.eigenvalues, source);
}

Vector WhiteningTransform::apply(const Vector& x) const {
  if (x.size() != scales_.size()) {
    throw ShapeError("apply_whitening: dimension mismatch");
  }
  if (!x.allFinite()) {
    throw DomainError("apply_whitening: observation must be finite");
  }
  return inv_sqrt_.asDiagonal() * (rotation_.transpose() * x);
}

Matrix WhiteningTransform::apply_rows(const Matrix& rows) const {
  if (rows.cols() != scales_.size()) {
    throw ShapeError("apply_whitening: dimension mismatch");
  }
  return rows * rotation_ * inv_sqrt_.asDiagonal();
}

OnlineCovarianceState::OnlineCovarianceState(int dim)
    : mean_(Vector::Zero(dim)), scatter_(Matrix::Zero(dim, dim)) {
  if (dim < 1) throw ShapeError("OnlineCovarianceState: dim must be positive");
}

void OnlineCovarianceState::update(const Vector& x) {
  if (x.size() != mean_.size()) {
    throw ShapeError("update_covariance_online: dimension mismatch");
  }
  if (!x.allFinite()) {
    throw DomainError("update_covariance_online: observation must be finite");
  }
  ++count_;
  const Vector delta = x - mean_;
  mean_ += delta / static_cast<double>(count_);
  // delta * (x - updated mean)^T keeps the scatter exactly equal to the
  // batch centered scatter of the ingested prefix.
  scatter_ += delta * (x - mean_).transpose();
}

SymMatrix OnlineCovarianceState::covariance() const {
  if (count_ < 2) {
    throw StateError("OnlineCovarianceState: need at least 2 rows, have " +
                     std::to_string(count_));
  }
  return SymMatrix(scatter_ / static_cast<double>(count_));
}

WhiteningTransform OnlineCovarianceState::finalize() const {
  if (count_ < dim() + 1) {
    throw StateError(
        "OnlineCovarianceState: need at least dim + 1 rows to finalize, have " +
        std::to_string(count_));
  }
  return WhiteningTransform::from_covariance(
      covariance(), CovarianceSource::online_estimated);
}

SymMatrix sample_covariance(const Matrix& data) {
  if (data.rows() < 2) {
    throw ShapeError("sample_covariance: need at least 2 rows");
  }
  if (!data.allFinite()) {
    throw DomainError("sample_covariance: rows must be finite");
  }
  const Vector mean = data.colwise().mean();
  const Matrix centered = data.rowwise() - mean.transpose();
  return SymMatrix(centered.transpose() * centered /
                   static_cast<double>(data.rows()));
}

WhiteningTransform fit_covariance_batch(const Matrix& data) {
  if (data.rows() < data.cols() + 1) {
    throw ShapeError("fit_covariance_batch: need at least dim + 1 rows, have " +
                     std::to_string(data.rows()));
  }
  return WhiteningTransform::from_covariance(sample_covariance(data),
                                             CovarianceSource::batch_estimated);
}

}  // namespace oal
