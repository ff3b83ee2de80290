#pragma once

#include <map>
#include <string>
#include <vector>

#include "oal/numerics.hpp"

namespace oal {

enum class BoundKind {
  upper_main,
  upper_gaussian,
  upper_sparse,
  lower_pointwise,
  lower_gaussian,
  lower_clt,
  ridge_f
};

std::string to_string(BoundKind kind);

/// Deterministic evaluation of one of the MSE bounds. Probabilistic constants
/// that the theory never pins down numerically are listed in `caveats`
/// instead of being invented.
struct BoundReport {
  BoundKind kind;
  double value = 0.0;
  std::map<std::string, double> parameters;
  std::vector<std::string> caveats;
};

/// d / ((1 - alpha)^2 phi k), the deterministic RHS of the main upper bound.
BoundReport upper_bound_main(int d, long k, double alpha, double phi);

/// Gaussian specialization: phi = 1 + 2 log(n/k) / d plugged into the main bound.
BoundReport upper_bound_gaussian(int d, long k, long n, double alpha);

/// Sparse two-stage RHS s / ((1 - alpha)^2 (1 + 2 log(n2/k2)/s) k2).
BoundReport upper_bound_sparse(int s, long k2, long n2, double alpha);

/// Pointwise floor d^2 / sum_i ||xbar_i||^2 over the selected whitened rows.
double lower_bound_pointwise(const Matrix& whitened_rows);

/// Gaussian lower bound; expectation form when alpha is NaN, otherwise the
/// high-probability form with the log-Gamma correction.
BoundReport lower_bound_gaussian(int d, long k, long n);
BoundReport lower_bound_gaussian_hp(int d, long k, long n, double alpha);

/// CLT lower bound d / ((1 + (gamma/d) sqrt(2 log n)) k).
BoundReport lower_bound_clt(int d, long k, long n, double gamma);

struct DiagTraceCheck {
  bool holds = false;
  double trace_inverse = 0.0;
  double trace_diag_inverse = 0.0;
};

/// Checks Tr(X^{-1}) >= Tr(Diag(X)^{-1}) for an SPD input; the verdict must
/// be true for every SPD matrix.
DiagTraceCheck check_diag_trace_lemma(const SymMatrix& a);

}  // namespace oal
