#include "oal/selectors.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace oal {

Selector Selector::fixed(long n, long k, ThresholdRule rule,
                         WhiteningTransform whitener) {
  if (k < 1 || k > n) {
    throw BudgetError("Selector: require 1 <= k <= n");
  }
  if (rule.weights.size() != whitener.dim()) {
    throw ShapeError("Selector: rule/whitener dimension mismatch");
  }
  Selector s;
  s.variant_ = SelectorVariant::fixed;
  s.budget_ = {n, k, 0, 0};
  s.rule_ = std::move(rule);
  s.whitener_ = std::move(whitener);
  s.dim_ = static_cast<int>(s.rule_.weights.size());
  return s;
}

Selector Selector::adaptive(long n, long k, int dim, ThresholdMethod method,
                            std::optional<WhiteningTransform> known_whitener,
                            double c_bar,
                            std::optional<Vector> fourth_moments) {
  if (k < 1 || k > n) {
    throw BudgetError("Selector: require 1 <= k <= n");
  }
  if (method == ThresholdMethod::clt && !fourth_moments) {
    throw DomainError("Selector: CLT method needs fourth moments");
  }
  Selector s;
  s.variant_ = SelectorVariant::adaptive;
  s.budget_ = {n, k, 0, 0};
  s.dim_ = dim;
  s.adaptive_method_ = method;
  s.c_bar_ = c_bar;
  s.fourth_moments_ = std::move(fourth_moments);
  s.rule_ = ThresholdRule::random_sampling(dim);
  if (known_whitener) {
    s.whitener_ = std::move(known_whitener);
  } else {
    s.online_.emplace(dim);
    s.warmup_rows_ = std::max<long>(dim + 1, 2L * dim);
  }
  return s;
}

SelectionDecision Selector::step(const Vector& x) {
  if (finished()) {
    throw StateError("Selector: stepping a finished machine");
  }
  if (x.size() != dim_) {
    throw ShapeError("Selector: observation has dimension " +
                     std::to_string(x.size()) + ", expected " +
                     std::to_string(dim_));
  }

  bool forced = budget_.remaining_budget() >= budget_.remaining_stream();

  Vector xbar;
  if (variant_ == SelectorVariant::adaptive) {
    if (online_) {
      online_->update(x);
      xbar = online_->count() >= warmup_rows_ ? online_->finalize().apply(x)
                                              : x;
    } else {
      xbar = whitener_->apply(x);
    }
    const double q = adaptive_selection_quantile(budget_);
    if (q >= 1.0) {
      forced = true;
    } else {
      switch (adaptive_method_) {
        case ThresholdMethod::zero:
          rule_ = ThresholdRule::random_sampling(dim_);
          break;
        case ThresholdMethod::clt:
          rule_ = clt_threshold_for_quantile(dim_, q, *fourth_moments_,
                                             Vector::Ones(dim_));
          break;
        case ThresholdMethod::gaussian_closed_form:
          rule_ = gaussian_threshold_for_quantile(
              dim_, q, GaussianThresholdMode::closed_form, c_bar_);
          break;
        default:
          rule_ = gaussian_threshold_for_quantile(
              dim_, q, GaussianThresholdMode::exact, c_bar_);
          break;
      }
    }
  } else {
    xbar = whitener_->apply(x);
  }

  SelectionDecision decision;
  decision.weighted_norm = std::sqrt(rule_.weighted_sq_norm(xbar));
  decision.threshold_used = rule_.gamma;
  decision.forced = forced;
  const bool passes = decision.weighted_norm >= rule_.gamma;
  if (passes) ++exceedances_;
  decision.selected = passes || forced;

  if (decision.selected) {
    raw_.push_back(x);
    whitened_.push_back(xbar);
    indices_.push_back(budget_.seen_count);
    ++budget_.selected_count;
  }
  ++budget_.seen_count;
  return decision;
}

namespace {

Matrix stack_rows(const std::vector<Vector>& rows, int dim) {
  Matrix m(static_cast<long>(rows.size()), dim);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    m.row(static_cast<long>(i)) = rows[i].transpose();
  }
  return m;
}

}  // namespace

Matrix Selector::selected_raw() const { return stack_rows(raw_, dim_); }

Matrix Selector::selected_whitened() const {
  return stack_rows(whitened_, dim_);
}

SparseTwoStageResult run_sparse_two_stage(const LabeledStream& stream,
                                          const SparseTwoStageConfig& config) {
  const long n = stream.size();
  const int d = stream.dim();
  const long k1 = config.k1;
  const long k2 = config.k2;
  if (k1 < 1 || k2 < 1 || k1 + k2 > n) {
    throw BudgetError("run_sparse_two_stage: require k1, k2 >= 1 and "
                      "k1 + k2 <= n");
  }

  // Stage 1: label the first k1 rows unconditionally.
  Matrix x1(k1, d);
  Vector y1(k1);
  for (long i = 0; i < k1; ++i) {
    x1.row(i) = stream.covariates(i).transpose();
    y1(i) = stream.label(i);
  }
  const double lambda = lasso_regularization(config.sigma, d, k1);
  SparseTwoStageResult result;
  result.stage1_fit = fit_lasso(x1, y1, lambda);

  for (int j = 0; j < d; ++j) {
    if (std::abs(result.stage1_fit.coefficients(j)) >
        config.support_threshold) {
      result.support.push_back(j);
    }
  }
  const auto s = static_cast<long>(result.support.size());

  if (s == 0) {
    // Degenerate support: stage 2 degrades to random sampling over all
    // dimensions, and the final estimate is a Lasso on everything labeled.
    result.fallback_random_stage2 = true;
    Matrix x_all(k1 + k2, d);
    Vector y_all(k1 + k2);
    x_all.topRows(k1) = x1;
    y_all.head(k1) = y1;
    for (long i = 0; i < k2; ++i) {
      x_all.row(k1 + i) = stream.covariates(k1 + i).transpose();
      y_all(k1 + i) = stream.label(k1 + i);
    }
    result.fit = fit_lasso(x_all, y_all, lambda);
    result.stage2_weights = Vector::Zero(d);
    return result;
  }
  if (k2 <= s) {
    throw BudgetError("run_sparse_two_stage: stage-2 budget k2 = " +
                      std::to_string(k2) +
                      " must exceed the recovered support size " +
                      std::to_string(s));
  }

  // Stage 2: threshold inside the recovered subspace.
  const long n2 = n - k1;
  Matrix restricted_stage1(k1, s);
  for (long i = 0; i < k1; ++i)
    for (long j = 0; j < s; ++j)
      restricted_stage1(i, j) = x1(i, result.support[j]);

  SymMatrix sigma_ss = [&] {
    if (config.exact_covariance) {
      Matrix sub(s, s);
      for (long a = 0; a < s; ++a)
        for (long b = 0; b < s; ++b)
          sub(a, b) =
              (*config.exact_covariance)(result.support[a], result.support[b]);
      return SymMatrix(sub);
    }
    return sample_covariance(restricted_stage1);
  }();
  const WhiteningTransform whitener = WhiteningTransform::from_covariance(
      sigma_ss, config.exact_covariance ? CovarianceSource::exact
                                        : CovarianceSource::batch_estimated);

  ThresholdRule rule;
  rule.weights = Vector::Ones(s);
  rule.gamma = config.c_gamma *
               std::sqrt(static_cast<double>(s) +
                         2.0 * std::log(static_cast<double>(n2) /
                                        static_cast<double>(k2)));
  rule.method = ThresholdMethod::gaussian_closed_form;
  rule.phi = rule.gamma * rule.gamma / static_cast<double>(s);

  Selector selector = Selector::fixed(n2, k2, rule, whitener);
  std::vector<long> picked;
  for (long i = k1; i < n && !selector.finished(); ++i) {
    Vector xs(s);
    const Vector x = stream.covariates(i);
    for (long j = 0; j < s; ++j) xs(j) = x(result.support[j]);
    if (selector.step(xs).selected) picked.push_back(i);
  }

  result.stage2_raw_support = selector.selected_raw();
  result.stage2_whitened = selector.selected_whitened();
  result.stage2_gamma = rule.gamma;
  result.stage2_weights = Vector::Zero(d);
  for (int j : result.support) result.stage2_weights(j) = 1.0;

  Vector y2(static_cast<long>(picked.size()));
  for (std::size_t i = 0; i < picked.size(); ++i) {
    y2(static_cast<long>(i)) = stream.label(picked[i]);
  }

  Matrix design = result.stage2_raw_support;
  Vector responses = y2;
  if (config.refit_with_all) {
    design.resize(k1 + picked.size(), s);
    design.topRows(k1) = restricted_stage1;
    design.bottomRows(static_cast<long>(picked.size())) =
        result.stage2_raw_support;
    responses.resize(k1 + picked.size());
    responses.head(k1) = y1;
    responses.tail(static_cast<long>(picked.size())) = y2;
  }
  result.fit = fit_ols(design, responses);
  result.fit.dims_used = result.support;
  return result;
}

}  // namespace oal
