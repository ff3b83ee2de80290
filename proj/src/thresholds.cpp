#include "oal/thresholds.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace oal {

ThresholdRule ThresholdRule::random_sampling(int d) {
  ThresholdRule rule;
  rule.weights = Vector::Ones(d);
  rule.gamma = 0.0;
  rule.phi = 1.0;
  rule.method = ThresholdMethod::zero;
  return rule;
}

namespace {

void check_budget(int d, long n, long k) {
  if (d < 1) throw DomainError("threshold: dimension must be positive");
  if (k < 1 || k > n) {
    throw BudgetError("threshold: require 1 <= k <= n, got k = " +
                      std::to_string(k) + ", n = " + std::to_string(n));
  }
}

}  // namespace

ThresholdRule gaussian_threshold_for_quantile(int d, double q,
                                              GaussianThresholdMode mode,
                                              double c_bar) {
  if (!(q > 0.0 && q <= 1.0)) {
    throw BudgetError("gaussian_threshold: selection probability out of (0, 1]");
  }
  if (!(c_bar > 0.0)) {
    throw DomainError("gaussian_threshold: c_bar must be positive");
  }
  ThresholdRule rule;
  rule.weights = Vector::Ones(d);
  if (mode == GaussianThresholdMode::exact) {
    rule.gamma = std::sqrt(chi2_quantile(d, 1.0 - q));
    rule.method = ThresholdMethod::gaussian_exact;
  } else {
    rule.gamma = c_bar * std::sqrt(d + 2.0 * std::log(1.0 / q));
    rule.method = ThresholdMethod::gaussian_closed_form;
  }
  rule.phi = rule.gamma * rule.gamma / d;
  return rule;
}

ThresholdRule gaussian_threshold(int d, long n, long k,
                                 GaussianThresholdMode mode, double c_bar) {
  check_budget(d, n, k);
  return gaussian_threshold_for_quantile(
      d, static_cast<double>(k) / static_cast<double>(n), mode, c_bar);
}

ThresholdRule clt_threshold_for_quantile(int d, double q,
                                         const Vector& fourth_moments,
                                         const Vector& weights) {
  if (!(q > 0.0 && q < 1.0)) {
    throw BudgetError("clt_threshold: selection probability out of (0, 1)");
  }
  if (fourth_moments.size() != d || weights.size() != d) {
    throw ShapeError("clt_threshold: moment/weight vectors must have length d");
  }
  if ((fourth_moments.array() < 1.0).any()) {
    throw DomainError(
        "clt_threshold: fourth moment below 1 is inconsistent with unit "
        "variance coordinates");
  }
  const double spread = std::sqrt(
      (weights.array().square() * (fourth_moments.array() - 1.0)).sum());
  const double gamma_sq =
      std::max(0.0, d + normal_quantile(1.0 - q) * spread);
  ThresholdRule rule;
  rule.weights = weights;
  rule.gamma = std::sqrt(gamma_sq);
  rule.method = ThresholdMethod::clt;
  rule.clt_spread = spread;
  rule.phi = gamma_sq / d;
  return rule;
}

ThresholdRule clt_threshold(int d, long n, long k,
                            const Vector& fourth_moments,
                            const Vector& weights) {
  check_budget(d, n, k);
  if (k == n) throw BudgetError("clt_threshold: require k < n");
  return clt_threshold_for_quantile(
      d, static_cast<double>(k) / static_cast<double>(n), fourth_moments,
      weights);
}

double empirical_quantile(std::vector<double> values, double p) {
  if (values.empty()) throw SampleError("empirical_quantile: empty sample");
  if (!(p >= 0.0 && p <= 1.0)) {
    throw DomainError("empirical_quantile: p out of [0, 1]");
  }
  std::sort(values.begin(), values.end());
  const auto m = static_cast<long>(values.size());
  long idx = static_cast<long>(std::ceil(p * static_cast<double>(m)));
  idx = std::clamp(idx, 1L, m);
  return values[idx - 1];
}

ThresholdRule solve_threshold_empirical(const Matrix& sample, double k,
                                        double n, int weight_iterations) {
  const int d = static_cast<int>(sample.cols());
  const long m = sample.rows();
  if (d < 1) throw ShapeError("solve_threshold_empirical: empty sample");
  if (m < 50L * d) {
    throw SampleError("solve_threshold_empirical: need at least 50*d rows, have " +
                      std::to_string(m));
  }
  const double q = k / n;
  if (!(q > 0.0 && q < 1.0)) {
    throw BudgetError("solve_threshold_empirical: require 0 < k/n < 1");
  }

  const Matrix sq = sample.array().square();
  Vector xi = Vector::Ones(d);
  double gamma = 0.0;
  Vector phi_j = Vector::Ones(d);
  bool converged = false;

  for (int it = 0; it < std::max(weight_iterations, 1); ++it) {
    const Vector norms_sq = sq * xi;
    std::vector<double> norms(m);
    for (long i = 0; i < m; ++i) norms[i] = std::sqrt(std::max(0.0, norms_sq(i)));
    gamma = empirical_quantile(norms, 1.0 - q);

    const double gamma_sq = gamma * gamma;
    Vector sum = Vector::Zero(d);
    long count = 0;
    for (long i = 0; i < m; ++i) {
      if (norms_sq(i) >= gamma_sq) {
        sum += sq.row(i).transpose();
        ++count;
      }
    }
    if (count < 10) {
      throw SampleError(
          "solve_threshold_empirical: fewer than 10 rows above threshold");
    }
    phi_j = sum / static_cast<double>(count);

    const double ratio = phi_j.maxCoeff() / phi_j.minCoeff();
    if (ratio <= 1.1) {
      converged = true;
      break;
    }
    // Damped multiplicative update toward equal conditional second moments.
    const double phi_bar = phi_j.mean();
    for (int j = 0; j < d; ++j) xi(j) *= std::sqrt(phi_bar / phi_j(j));
    xi *= d / xi.sum();
  }

  ThresholdRule rule;
  rule.weights = xi;
  rule.gamma = gamma;
  rule.method = ThresholdMethod::empirical;
  rule.phi = phi_j.mean();
  rule.phi_ratio = phi_j.maxCoeff() / phi_j.minCoeff();
  rule.converged = converged || rule.phi_ratio <= 1.1;
  return rule;
}

double adaptive_selection_quantile(const BudgetState& b) {
  if (b.seen_count >= b.n_total) {
    throw StateError("adaptive_selection_quantile: stream exhausted");
  }
  if (b.selected_count >= b.k_total) {
    throw StateError("adaptive_selection_quantile: budget exhausted");
  }
  const double q = static_cast<double>(b.remaining_budget()) /
                   static_cast<double>(b.remaining_stream());
  return std::clamp(q, 0.0, 1.0);
}

PhiEstimate estimate_phi(const ThresholdRule& rule, const Matrix& sample) {
  const int d = static_cast<int>(sample.cols());
  if (rule.weights.size() != d) {
    throw ShapeError("estimate_phi: dimension mismatch");
  }
  const double gamma_sq = rule.gamma * rule.gamma;
  double sum = 0.0, sum_sq = 0.0;
  long count = 0;
  for (long i = 0; i < sample.rows(); ++i) {
    const double z =
        (rule.weights.array() * sample.row(i).transpose().array().square())
            .sum();
    if (z >= gamma_sq) {
      sum += z;
      sum_sq += z * z;
      ++count;
    }
  }
  if (count < 30) {
    throw SampleError("estimate_phi: need at least 30 exceedances, have " +
                      std::to_string(count));
  }
  const double mean = sum / static_cast<double>(count);
  const double var =
      std::max(0.0, sum_sq / static_cast<double>(count) - mean * mean);
  PhiEstimate est;
  est.value = mean / d;
  est.floor = gamma_sq / d;
  est.std_error = std::sqrt(var / static_cast<double>(count)) / d;
  est.exceedances = count;
  return est;
}

}  // namespace oal
