#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "oal/estimators.hpp"
#include "oal/thresholds.hpp"
#include "oal/whitening.hpp"

namespace oal {

enum class SelectorVariant { fixed, adaptive, sparse_stage1, sparse_stage2 };

struct SelectionDecision {
  bool selected = false;
  double weighted_norm = 0.0;  // ||xbar||_xi at decision time
  double threshold_used = 0.0;
  bool forced = false;
};

/// Streaming selection state machine for the fixed- and adaptive-threshold
/// algorithms. One machine per stream, stepped strictly sequentially.
class Selector {
 public:
  /// Fixed threshold and fixed whitening for the whole stream.
  static Selector fixed(long n, long k, ThresholdRule rule,
                        WhiteningTransform whitener);

  /// Adaptive variant: the threshold is recomputed before every decision from
  /// the remaining budget. When no whitener is supplied the covariance is
  /// estimated online from all seen rows (labels are never needed for that)
  /// and trusted only after max(d+1, 2d) warm-up rows.
  static Selector adaptive(long n, long k, int dim, ThresholdMethod method,
                           std::optional<WhiteningTransform> known_whitener,
                           double c_bar = 1.0,
                           std::optional<Vector> fourth_moments = std::nullopt);

  SelectionDecision step(const Vector& x);

  bool finished() const {
    return budget_.seen_count >= budget_.n_total ||
           budget_.selected_count >= budget_.k_total;
  }
  const BudgetState& budget() const { return budget_; }
  const ThresholdRule& rule() const { return rule_; }
  SelectorVariant variant() const { return variant_; }
  /// Rows whose weighted norm met the threshold, regardless of budget.
  long exceedance_count() const { return exceedances_; }

  const std::vector<long>& selected_indices() const { return indices_; }
  Matrix selected_raw() const;
  Matrix selected_whitened() const;

 private:
  Selector() = default;

  SelectorVariant variant_ = SelectorVariant::fixed;
  BudgetState budget_;
  ThresholdRule rule_;
  std::optional<WhiteningTransform> whitener_;
  std::optional<OnlineCovarianceState> online_;
  long warmup_rows_ = 0;
  ThresholdMethod adaptive_method_ = ThresholdMethod::gaussian_exact;
  double c_bar_ = 1.0;
  std::optional<Vector> fourth_moments_;
  int dim_ = 0;
  long exceedances_ = 0;

  std::vector<Vector> raw_;
  std::vector<Vector> whitened_;
  std::vector<long> indices_;
};

/// Covariates of a stream whose responses are revealed only when a row is
/// selected (labeling-cost semantics).
class LabeledStream {
 public:
  LabeledStream(Matrix covariates, std::function<double(long)> reveal)
      : covariates_(std::move(covariates)), reveal_(std::move(reveal)) {}

  long size() const { return covariates_.rows(); }
  int dim() const { return static_cast<int>(covariates_.cols()); }
  Vector covariates(long i) const { return covariates_.row(i).transpose(); }
  double label(long i) const { return reveal_(i); }

 private:
  Matrix covariates_;
  std::function<double(long)> reveal_;
};

struct SparseTwoStageConfig {
  long k1 = 0;
  long k2 = 0;
  double sigma = 1.0;  // noise sd entering the lasso regularization rule
  double support_threshold = 1e-8;
  double c_gamma = 1.0;  // C in Gamma = C sqrt(s + 2 log(n2/k2))
  bool refit_with_all = false;  // final OLS on stage-1 + stage-2 rows
  /// Whiten stage 2 with the restriction of this exact covariance; absent
  /// means the stage-1 sample estimate.
  std::optional<SymMatrix> exact_covariance;
};

struct SparseTwoStageResult {
  std::vector<int> support;
  LinearFit fit;  // support-restricted; embed() gives the full-dim estimate
  bool fallback_random_stage2 = false;
  Vector stage2_weights;        // full-dim xi, 1 on the recovered support
  double stage2_gamma = 0.0;
  Matrix stage2_raw_support;    // selected stage-2 rows restricted to support
  Matrix stage2_whitened;      // their whitened images
  LinearFit stage1_fit;
};

/// Two-stage sparse selection: label the first k1 rows, recover the support
/// with the Lasso, then threshold the remaining stream inside the recovered
/// subspace and fit OLS there.
SparseTwoStageResult run_sparse_two_stage(const LabeledStream& stream,
                                          const SparseTwoStageConfig& config);

}  // namespace oal
