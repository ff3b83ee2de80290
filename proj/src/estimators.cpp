#include "oal/estimators.hpp"

#include <cmath>
#include <string>

namespace oal {

Vector LinearFit::embed(int ambient_dim) const {
  if (dims_used.empty()) {
    if (coefficients.size() != ambient_dim) {
      throw ShapeError("LinearFit::embed: ambient dimension mismatch");
    }
    return coefficients;
  }
  Vector full = Vector::Zero(ambient_dim);
  for (std::size_t i = 0; i < dims_used.size(); ++i) {
    full(dims_used[i]) = coefficients(static_cast<int>(i));
  }
  return full;
}

std::vector<int> LinearModel::support(double tol) const {
  std::vector<int> s;
  for (int j = 0; j < beta.size(); ++j) {
    if (std::abs(beta(j)) > tol) s.push_back(j);
  }
  return s;
}

namespace {

void check_design(const Matrix& X, const Vector& y) {
  if (X.rows() != y.size()) {
    throw ShapeError("fit: X has " + std::to_string(X.rows()) +
                     " rows but y has " + std::to_string(y.size()));
  }
  if (X.rows() == 0 || X.cols() == 0) {
    throw ShapeError("fit: empty design");
  }
  if (!X.allFinite() || !y.allFinite()) {
    throw DomainError("fit: design and responses must be finite");
  }
}

// Solve (gram + lambda I) beta = rhs through the Jacobi eigendecomposition,
// rejecting designs that fail the SPD criterion when lambda = 0.
Vector spd_solve(const SymMatrix& gram, const Vector& rhs, double lambda) {
  const EigDecomposition eig = eig_sym(gram);
  if (lambda == 0.0 && !is_spd(eig)) {
    throw RankError("fit_ols: singular design (lambda_min = " +
                    std::to_string(eig.eigenvalues(eig.eigenvalues.size() - 1)) +
                    ")");
  }
  const Vector inv = (eig.eigenvalues.array() + lambda).inverse();
  return eig.eigenvectors *
         (inv.asDiagonal() * (eig.eigenvectors.transpose() * rhs));
}

}  // namespace

LinearFit fit_ols(const Matrix& X, const Vector& y) {
  check_design(X, y);
  if (X.rows() <= X.cols()) {
    throw RankError("fit_ols: need more rows than columns");
  }
  LinearFit fit;
  fit.method = FitMethod::ols;
  fit.design_rows = X.rows();
  fit.coefficients =
      spd_solve(SymMatrix(X.transpose() * X), X.transpose() * y, 0.0);
  return fit;
}

LinearFit fit_ridge(const Matrix& X, const Vector& y, double lambda) {
  if (lambda < 0) throw DomainError("fit_ridge: lambda must be nonnegative");
  if (lambda == 0.0) return fit_ols(X, y);
  check_design(X, y);
  LinearFit fit;
  fit.method = FitMethod::ridge;
  fit.lambda = lambda;
  fit.design_rows = X.rows();
  fit.coefficients =
      spd_solve(SymMatrix(X.transpose() * X), X.transpose() * y, lambda);
  return fit;
}

LinearFit fit_lasso(const Matrix& X, const Vector& y, double lambda) {
  check_design(X, y);
  if (lambda < 0) throw DomainError("fit_lasso: lambda must be nonnegative");
  const auto k = static_cast<double>(X.rows());
  const int d = static_cast<int>(X.cols());

  const Vector col_sq = X.colwise().squaredNorm() / k;  // (1/k) x_j^T x_j
  Vector beta = Vector::Zero(d);
  Vector residual = y;

  constexpr int max_sweeps = 10000;
  constexpr double tol = 1e-10;
  bool converged = false;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double max_change = 0.0;
    for (int j = 0; j < d; ++j) {
      if (col_sq(j) == 0.0) continue;
      const double old = beta(j);
      const double rho = X.col(j).dot(residual) / k + col_sq(j) * old;
      double next = 0.0;
      if (rho > lambda) {
        next = (rho - lambda) / col_sq(j);
      } else if (rho < -lambda) {
        next = (rho + lambda) / col_sq(j);
      }
      if (next != old) {
        residual += X.col(j) * (old - next);
        beta(j) = next;
        max_change = std::max(max_change, std::abs(next - old));
      }
    }
    if (max_change < tol) {
      converged = true;
      break;
    }
  }

  LinearFit fit;
  fit.method = FitMethod::lasso;
  fit.lambda = lambda;
  fit.design_rows = X.rows();
  fit.coefficients = beta;
  fit.converged = converged;
  return fit;
}

double lasso_regularization(double sigma, int d, long k1) {
  if (d < 2) throw DomainError("lasso_regularization: require d >= 2");
  if (k1 < 1) throw DomainError("lasso_regularization: require k1 >= 1");
  if (sigma < 0) throw DomainError("lasso_regularization: sigma must be >= 0");
  return std::sqrt(16.0 * sigma * sigma * std::log(static_cast<double>(d)) /
                   static_cast<double>(k1));
}

double ridge_mse_bound(double lambda_min, double R, double sigma, int d,
                       double beta_norm_sq) {
  if (!(R > 0)) throw DomainError("ridge_mse_bound: R must be positive");
  if (lambda_min < 0) {
    throw DomainError("ridge_mse_bound: lambda_min must be nonnegative");
  }
  const double variance = sigma * sigma * d / (lambda_min + R);
  double bias_factor = 1.0;  // limit of the bracket as lambda_min -> 0
  if (lambda_min > 0) {
    bias_factor = 1.0 -
                  (2.0 * lambda_min / R) * std::log1p(R / lambda_min) +
                  lambda_min / (lambda_min + R);
  }
  return variance + beta_norm_sq * bias_factor;
}

}  // namespace oal
