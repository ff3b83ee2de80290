#pragma once

#include <optional>
#include <vector>

#include "oal/numerics.hpp"

namespace oal {

enum class ThresholdMethod {
  gaussian_exact,       // Gamma^2 from the chi-square quantile
  gaussian_closed_form, // Gamma = c_bar * sqrt(d + 2 log(n/k))
  clt,                  // Gamma^2 = d + Phi^{-1}(1 - k/n) * gamma
  empirical,            // fixed-point solve on a whitened sample
  zero                  // Gamma = 0, i.e. random sampling
};

/// Selection rule: select a whitened observation iff sum_j xi_j xbar_j^2 >= Gamma^2.
/// Weights are normalized to sum_j xi_j = d (or xi in {0,1} for sparse rules).
struct ThresholdRule {
  Vector weights;
  double gamma = 0.0;
  std::optional<double> phi;
  ThresholdMethod method = ThresholdMethod::zero;
  std::optional<double> clt_spread;  // the CLT standard deviation of Z_xi
  bool converged = true;
  double phi_ratio = 1.0;  // max_j phi_j / min_j phi_j from the empirical solver

  double weighted_sq_norm(const Vector& xbar) const {
    if (xbar.size() != weights.size()) {
      throw ShapeError("ThresholdRule: dimension mismatch");
    }
    return (weights.array() * xbar.array().square()).sum();
  }
  bool selects(const Vector& xbar) const {
    return weighted_sq_norm(xbar) >= gamma * gamma;
  }

  static ThresholdRule random_sampling(int d);
};

/// Budget counters of a streaming selector: i - 1 observations seen,
/// |S_{i-1}| of them labeled, out of (n, k).
struct BudgetState {
  long n_total = 0;
  long k_total = 0;
  long seen_count = 0;
  long selected_count = 0;

  long remaining_stream() const { return n_total - seen_count; }
  long remaining_budget() const { return k_total - selected_count; }
};

enum class GaussianThresholdMode { exact, closed_form };

/// Threshold for jointly Gaussian data: all-ones weights, Gamma either from
/// the exact chi-square quantile or the closed form c_bar * sqrt(d + 2 log(n/k)).
ThresholdRule gaussian_threshold(int d, long n, long k,
                                 GaussianThresholdMode mode,
                                 double c_bar = 1.0);

/// Same rule parameterized by the selection probability q = k/n in (0, 1].
ThresholdRule gaussian_threshold_for_quantile(int d, double q,
                                              GaussianThresholdMode mode,
                                              double c_bar = 1.0);

/// CLT threshold for independent white coordinates with known fourth moments.
ThresholdRule clt_threshold(int d, long n, long k,
                            const Vector& fourth_moments,
                            const Vector& weights);

ThresholdRule clt_threshold_for_quantile(int d, double q,
                                         const Vector& fourth_moments,
                                         const Vector& weights);

/// Fixed-point solve of the weight/threshold equations on a whitened sample:
/// Gamma is the empirical (1 - k/n)-quantile of the weighted norm, weights are
/// pushed multiplicatively toward equal conditional second moments.
ThresholdRule solve_threshold_empirical(const Matrix& whitened_sample,
                                        double k, double n,
                                        int weight_iterations = 50);

/// Remaining-budget selection probability (k - |S|) / (n - i + 1), in [0, 1].
double adaptive_selection_quantile(const BudgetState& b);

struct PhiEstimate {
  double value = 0.0;      // Monte-Carlo estimate of E[Z_xi | Z_xi >= Gamma^2] / d
  double floor = 0.0;      // analytic lower bound Gamma^2 / d
  double std_error = 0.0;
  long exceedances = 0;
};

/// Monte-Carlo estimate of phi over a whitened sample; requires at least 30
/// rows above the threshold.
PhiEstimate estimate_phi(const ThresholdRule& rule,
                         const Matrix& whitened_sample);

/// Order statistic at ceil(p * m), lower interpolation. p in [0, 1].
double empirical_quantile(std::vector<double> values, double p);

}  // namespace oal
