#include "oal/bounds.hpp"

#include <cmath>

namespace oal {

std::string to_string(BoundKind kind) {
  switch (kind) {
    case BoundKind::upper_main: return "upper-main";
    case BoundKind::upper_gaussian: return "upper-gaussian";
    case BoundKind::upper_sparse: return "upper-sparse";
    case BoundKind::lower_pointwise: return "lower-pointwise";
    case BoundKind::lower_gaussian: return "lower-gaussian";
    case BoundKind::lower_clt: return "lower-clt";
    case BoundKind::ridge_f: return "ridge-f";
  }
  return "unknown";
}

namespace {

const char* kProbabilityCaveat =
    "holds with probability 1 - 2 exp(-c t^2); subgaussian-norm constants "
    "c, C are not evaluated";

void check_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw DomainError("bound: alpha must lie in (0, 1)");
  }
}

}  // namespace

BoundReport upper_bound_main(int d, long k, double alpha, double phi) {
  check_alpha(alpha);
  if (d < 1 || k < 1) throw DomainError("upper_bound_main: require d, k >= 1");
  if (!(phi > 0)) throw DomainError("upper_bound_main: phi must be positive");
  BoundReport r;
  r.kind = BoundKind::upper_main;
  r.value = d / ((1.0 - alpha) * (1.0 - alpha) * phi * k);
  r.parameters = {{"d", double(d)}, {"k", double(k)}, {"alpha", alpha},
                  {"phi", phi}};
  r.caveats = {kProbabilityCaveat};
  return r;
}

BoundReport upper_bound_gaussian(int d, long k, long n, double alpha) {
  if (n < k || k < 1) throw DomainError("upper_bound_gaussian: require n >= k >= 1");
  const double phi =
      1.0 + 2.0 * std::log(double(n) / double(k)) / double(d);
  BoundReport r = upper_bound_main(d, k, alpha, phi);
  r.kind = BoundKind::upper_gaussian;
  r.parameters["n"] = double(n);
  r.parameters["log_factor"] = 2.0 * std::log(double(n) / double(k)) / double(d);
  return r;
}

BoundReport upper_bound_sparse(int s, long k2, long n2, double alpha) {
  check_alpha(alpha);
  if (s < 1 || k2 < 1 || n2 < k2) {
    throw DomainError("upper_bound_sparse: require n2 >= k2 >= 1, s >= 1");
  }
  const double phi =
      1.0 + 2.0 * std::log(double(n2) / double(k2)) / double(s);
  BoundReport r;
  r.kind = BoundKind::upper_sparse;
  r.value = s / ((1.0 - alpha) * (1.0 - alpha) * phi * k2);
  r.parameters = {{"s", double(s)}, {"k2", double(k2)}, {"n2", double(n2)},
                  {"alpha", alpha}, {"phi", phi}};
  r.caveats = {kProbabilityCaveat,
               "assumes exact support recovery in stage 1"};
  return r;
}

double lower_bound_pointwise(const Matrix& whitened_rows) {
  if (whitened_rows.rows() == 0) {
    throw StateError("lower_bound_pointwise: empty selection");
  }
  const double d = static_cast<double>(whitened_rows.cols());
  const double total = whitened_rows.rowwise().squaredNorm().sum();
  if (!(total > 0)) {
    throw DomainError("lower_bound_pointwise: zero total norm");
  }
  return d * d / total;
}

BoundReport lower_bound_gaussian(int d, long k, long n) {
  if (n < 3) throw DomainError("lower_bound_gaussian: require n >= 3");
  if (d < 1 || k < 1) throw DomainError("lower_bound_gaussian: require d, k >= 1");
  const double log_n = std::log(double(n));
  const double denom = 2.0 * log_n / d + std::log(log_n);
  BoundReport r;
  r.kind = BoundKind::lower_gaussian;
  r.value = d / (k * denom);
  r.parameters = {{"d", double(d)}, {"k", double(k)}, {"n", double(n)}};
  r.caveats = {"Gumbel limit of the maximum is treated as exact (large n)"};
  return r;
}

BoundReport lower_bound_gaussian_hp(int d, long k, long n, double alpha) {
  check_alpha(alpha);
  BoundReport r = lower_bound_gaussian(d, k, n);
  const double log_n = std::log(double(n));
  const double correction =
      std::log(std::log(1.0 / (1.0 - alpha))) / d + 2.0 * log_gamma(d / 2.0) / d;
  const double denom = 2.0 * log_n / d + std::log(log_n) - correction;
  if (!(denom > 0)) {
    throw DomainError("lower_bound_gaussian: denominator not positive at this "
                      "(d, n, alpha)");
  }
  r.value = d / (k * denom);
  r.parameters["alpha"] = alpha;
  r.parameters["log_gamma_correction"] = 2.0 * log_gamma(d / 2.0) / d;
  r.caveats.push_back("holds with probability at least 1 - alpha");
  return r;
}

BoundReport lower_bound_clt(int d, long k, long n, double gamma) {
  if (n < 2) throw DomainError("lower_bound_clt: require n >= 2");
  if (gamma < 0) throw DomainError("lower_bound_clt: gamma must be >= 0");
  if (d < 1 || k < 1) throw DomainError("lower_bound_clt: require d, k >= 1");
  const double denom =
      1.0 + (gamma / d) * std::sqrt(2.0 * std::log(double(n)));
  BoundReport r;
  r.kind = BoundKind::lower_clt;
  r.value = d / (denom * k);
  r.parameters = {{"d", double(d)}, {"k", double(k)}, {"n", double(n)},
                  {"gamma", gamma}};
  r.caveats = {"normal approximation of the weighted squared norm"};
  return r;
}

DiagTraceCheck check_diag_trace_lemma(const SymMatrix& a) {
  DiagTraceCheck out;
  out.trace_inverse = spd_inverse_trace(a);  // throws RankError if not SPD
  if ((a.mat().diagonal().array() <= 0).any()) {
    throw RankError("check_diag_trace_lemma: nonpositive diagonal entry");
  }
  out.trace_diag_inverse = a.mat().diagonal().cwiseInverse().sum();
  const double slack = 1e-10 * std::max(1.0, std::abs(out.trace_inverse));
  out.holds = out.trace_inverse >= out.trace_diag_inverse - slack;
  return out;
}

}  // namespace oal
