#pragma once

#include <Eigen/Dense>

#include "oal/errors.hpp"

namespace oal {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Dense symmetric matrix. Symmetrized on construction; entries must be finite.
class SymMatrix {
 public:
  explicit SymMatrix(const Matrix& a);

  static SymMatrix identity(int dim);
  static SymMatrix diagonal(const Vector& diag);

  int dim() const { return static_cast<int>(m_.rows()); }
  const Matrix& mat() const { return m_; }
  double operator()(int i, int j) const { return m_(i, j); }

 private:
  Matrix m_;
};

/// Eigenvalues sorted descending; eigenvector columns paired with eigenvalues.
struct EigDecomposition {
  Vector eigenvalues;
  Matrix eigenvectors;
};

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
/// Guarantees ||V^T V - I||_max <= 1e-10 and reconstruction to 1e-8 * ||A||_max.
EigDecomposition eig_sym(const SymMatrix& a);

/// Sum of inverse eigenvalues of an SPD matrix, i.e. Tr(A^{-1}).
/// Rejects inputs with lambda_min <= 1e-12 * lambda_max.
double spd_inverse_trace(const SymMatrix& a);

/// Relative SPD acceptance threshold shared by all solvers.
inline constexpr double kSpdRelTol = 1e-12;

/// True iff the decomposition passes the SPD criterion lambda_min > 1e-12 * lambda_max.
bool is_spd(const EigDecomposition& eig);

/// Quantile function of the chi-square distribution with `dof` degrees of freedom.
/// 0 <= p < 1. Evaluated by inverting the regularized lower incomplete gamma CDF
/// with bracketed bisection refined by Newton steps.
double chi2_quantile(int dof, double p);

/// CDF of the chi-square distribution (regularized lower incomplete gamma).
double chi2_cdf(int dof, double x);

/// Standard normal quantile, 0 < p < 1. Phi(result) = p to 1e-10.
double normal_quantile(double p);

/// Standard normal CDF.
double normal_cdf(double x);

/// log Gamma(x) for x > 0 via a Stirling-series kernel (|error| < 1e-10 for x >= 8)
/// with downward recurrence for smaller arguments.
double log_gamma(double x);

/// Regularized lower incomplete gamma P(a, x), by series for x < a + 1 and
/// continued fraction otherwise.
double gamma_p(double a, double x);

}  // namespace oal
