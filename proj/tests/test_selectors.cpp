#include <cmath>
#include <vector>

#include "doctest.h"
#include "oal/bounds.hpp"
#include "oal/datagen.hpp"
#include "oal/selectors.hpp"

using namespace oal;

namespace {

Matrix white_stream(long n, int d, std::uint64_t seed) {
  Rng rng(seed);
  return sample_observations(DistributionSpec::white_gaussian(d), n, rng);
}

std::vector<SelectionDecision> run_stream(Selector& sel, const Matrix& x) {
  std::vector<SelectionDecision> decisions;
  for (long i = 0; i < x.rows() && !sel.finished(); ++i) {
    decisions.push_back(sel.step(x.row(i).transpose()));
  }
  return decisions;
}

}  // namespace

TEST_CASE("Gamma = 0 selects the first k rows (random sampling)") {
  const Matrix x = white_stream(100, 3, 201);
  Selector sel = Selector::fixed(100, 10, ThresholdRule::random_sampling(3),
                                 WhiteningTransform::identity(3));
  run_stream(sel, x);
  const auto& idx = sel.selected_indices();
  REQUIRE(idx.size() == 10);
  for (long i = 0; i < 10; ++i) CHECK(idx[static_cast<std::size_t>(i)] == i);
  // The OLS fit on the selection equals the passive baseline on the same rows.
  LinearModel model;
  model.beta = Vector::Ones(3);
  Rng noise(202);
  const Vector y = gen_responses(x, ResponseSpec{model, 0.0}, noise);
  const auto active = fit_ols(sel.selected_raw(), y.head(10));
  const auto passive = fit_ols(x.topRows(10), y.head(10));
  CHECK((active.coefficients - passive.coefficients).cwiseAbs().maxCoeff() ==
        0.0);
}

TEST_CASE("forced selection fires when budget equals remaining stream") {
  // A rule that rejects everything: the machine must still return k labels.
  ThresholdRule rule;
  rule.weights = Vector::Ones(2);
  rule.gamma = 1e9;
  const Matrix x = white_stream(20, 2, 203);
  Selector sel =
      Selector::fixed(20, 5, rule, WhiteningTransform::identity(2));
  const auto decisions = run_stream(sel, x);
  REQUIRE(decisions.size() == 20);
  for (int i = 0; i < 15; ++i) {
    CHECK(!decisions[static_cast<std::size_t>(i)].selected);
  }
  for (int i = 15; i < 20; ++i) {
    CHECK(decisions[static_cast<std::size_t>(i)].forced);
    CHECK(decisions[static_cast<std::size_t>(i)].selected);
  }
  CHECK(sel.budget().selected_count == 5);
}

TEST_CASE("exact Gaussian rule yields a binomially consistent stream") {
  const int d = 10;
  const long n = 2000, k = 100;
  const Matrix x = white_stream(n, d, 204);
  Selector sel = Selector::fixed(
      n, k, gaussian_threshold(d, n, k, GaussianThresholdMode::exact),
      WhiteningTransform::identity(d));
  run_stream(sel, x);
  CHECK(sel.budget().selected_count == k);
  const double tol = 3.0 * std::sqrt(double(k) * (1.0 - double(k) / n));
  CHECK(std::abs(double(sel.exceedance_count()) - double(k)) <= tol);
}

TEST_CASE("decision invariant selected == passes-or-forced") {
  const Matrix x = white_stream(500, 4, 205);
  Selector sel = Selector::fixed(
      500, 30, gaussian_threshold(4, 500, 30, GaussianThresholdMode::exact),
      WhiteningTransform::identity(4));
  for (const auto& decision : run_stream(sel, x)) {
    const bool passes = decision.weighted_norm >= decision.threshold_used;
    CHECK(decision.selected == (passes || decision.forced));
  }
}

TEST_CASE("stepping a finished machine or a wrong shape throws") {
  const Matrix x = white_stream(5, 2, 206);
  Selector sel = Selector::fixed(5, 5, ThresholdRule::random_sampling(2),
                                 WhiteningTransform::identity(2));
  run_stream(sel, x);
  CHECK(sel.finished());
  CHECK_THROWS_AS(sel.step(Vector::Zero(2)), StateError);
  Selector fresh = Selector::fixed(5, 2, ThresholdRule::random_sampling(2),
                                   WhiteningTransform::identity(2));
  CHECK_THROWS_AS(fresh.step(Vector::Zero(3)), ShapeError);
}

TEST_CASE("adaptive first step with known Sigma matches fixed") {
  const int d = 6;
  const long n = 400, k = 20;
  const auto whitener = WhiteningTransform::identity(d);
  const auto rule = gaussian_threshold(d, n, k, GaussianThresholdMode::exact);
  const Matrix x = white_stream(1, d, 207);
  Selector fixed = Selector::fixed(n, k, rule, whitener);
  Selector adaptive = Selector::adaptive(n, k, d,
                                         ThresholdMethod::gaussian_exact,
                                         whitener);
  const auto df = fixed.step(x.row(0).transpose());
  const auto da = adaptive.step(x.row(0).transpose());
  CHECK(df.selected == da.selected);
  CHECK(df.weighted_norm == doctest::Approx(da.weighted_norm));
  CHECK(df.threshold_used == doctest::Approx(da.threshold_used).epsilon(1e-9));
}

TEST_CASE("adaptive threshold decays along a non-selecting prefix") {
  const int d = 3;
  const long n = 50, k = 5;
  Selector sel = Selector::adaptive(n, k, d, ThresholdMethod::gaussian_exact,
                                    WhiteningTransform::identity(d));
  double prev = 1e300;
  for (int i = 0; i < 30; ++i) {
    const auto decision = sel.step(Vector::Constant(d, 1e-6));
    CHECK(!decision.selected);
    CHECK(decision.threshold_used < prev);
    prev = decision.threshold_used;
  }
}

TEST_CASE("decision sequences are deterministic") {
  const int d = 5;
  const Matrix x = white_stream(300, d, 208);
  for (int rep = 0; rep < 2; ++rep) {
    static std::vector<bool> reference;
    Selector sel = Selector::adaptive(300, 25, d,
                                      ThresholdMethod::gaussian_exact,
                                      std::nullopt);
    std::vector<bool> got;
    for (const auto& decision : run_stream(sel, x)) {
      got.push_back(decision.selected);
    }
    if (rep == 0) {
      reference = got;
    } else {
      CHECK(got == reference);
    }
  }
}

TEST_CASE("budget exactness across variants") {
  const int d = 4;
  const long n = 250, k = 30;
  const Matrix x = white_stream(n, d, 209);
  std::vector<Selector> machines;
  machines.push_back(Selector::fixed(
      n, k, gaussian_threshold(d, n, k, GaussianThresholdMode::exact),
      WhiteningTransform::identity(d)));
  machines.push_back(Selector::fixed(n, k, ThresholdRule::random_sampling(d),
                                     WhiteningTransform::identity(d)));
  machines.push_back(Selector::adaptive(n, k, d,
                                        ThresholdMethod::gaussian_exact,
                                        std::nullopt));
  machines.push_back(Selector::adaptive(n, k, d,
                                        ThresholdMethod::gaussian_closed_form,
                                        WhiteningTransform::identity(d)));
  for (auto& m : machines) {
    run_stream(m, x);
    CHECK(m.budget().selected_count == k);
  }
}

TEST_CASE("pointwise bound compatibility on finished runs") {
  Rng rng(210);
  for (int run = 0; run < 20; ++run) {
    const int d = 5;
    const SymMatrix sigma = random_spd(d, 0.4, 2.0, rng);
    Rng stream_rng = rng.split(run);
    const Matrix x = sample_observations(DistributionSpec::gaussian(sigma),
                                         400, stream_rng);
    Selector sel = Selector::fixed(
        400, 50, gaussian_threshold(d, 400, 50, GaussianThresholdMode::exact),
        WhiteningTransform::from_covariance(sigma, CovarianceSource::exact));
    run_stream(sel, x);
    const Matrix raw = sel.selected_raw();
    const double lhs =
        (sigma.mat() * (raw.transpose() * raw).inverse()).trace();
    const double rhs = lower_bound_pointwise(sel.selected_whitened());
    CHECK(lhs >= rhs - 1e-10);
  }
}

TEST_CASE("sparse two-stage recovers a strong support") {
  const int d = 30, s = 3;
  const long n = 400;
  Rng rng(211);
  const Matrix x =
      sample_observations(DistributionSpec::white_gaussian(d), n, rng);
  LinearModel model;
  model.beta = Vector::Zero(d);
  model.beta(2) = 4.0;
  model.beta(11) = -5.0;
  model.beta(17) = 3.0;
  model.noise_sigma = 0.5;
  Rng noise(212);
  const Vector y = gen_responses(x, ResponseSpec{model, 0.0}, noise);

  SparseTwoStageConfig config;
  config.k1 = 60;
  config.k2 = 30;
  config.sigma = 0.5;
  config.exact_covariance = SymMatrix::identity(d);
  long labels_revealed = 0;
  LabeledStream stream(x, [&](long i) {
    ++labels_revealed;
    return y(i);
  });
  const auto result = run_sparse_two_stage(stream, config);

  REQUIRE(result.support.size() == s);
  CHECK(result.support[0] == 2);
  CHECK(result.support[1] == 11);
  CHECK(result.support[2] == 17);
  // Stage-2 weights are the 0/1 indicator of the support.
  for (int j = 0; j < d; ++j) {
    const bool on = j == 2 || j == 11 || j == 17;
    CHECK(result.stage2_weights(j) == (on ? 1.0 : 0.0));
  }
  // The final estimate is zero off-support by construction and close on it.
  const Vector full = result.fit.embed(d);
  for (int j = 0; j < d; ++j) {
    if (j != 2 && j != 11 && j != 17) CHECK(full(j) == 0.0);
  }
  CHECK((full - model.beta).cwiseAbs().maxCoeff() < 0.5);
  // Labeling-cost semantics: only k1 + selected stage-2 rows were revealed.
  CHECK(labels_revealed ==
        config.k1 + result.stage2_raw_support.rows());
  CHECK(!result.fallback_random_stage2);
}

TEST_CASE("sparse two-stage budget and degenerate-support handling") {
  const int d = 10;
  Rng rng(213);
  const Matrix x =
      sample_observations(DistributionSpec::white_gaussian(d), 200, rng);
  // Pure noise with a huge regularization-driving sigma: empty support.
  Vector y(200);
  Rng noise(214);
  for (long i = 0; i < 200; ++i) y(i) = 0.01 * noise.normal();
  LabeledStream stream(x, [&](long i) { return y(i); });

  SparseTwoStageConfig config;
  config.k1 = 40;
  config.k2 = 20;
  config.sigma = 50.0;  // lambda far above every correlation
  const auto result = run_sparse_two_stage(stream, config);
  CHECK(result.fallback_random_stage2);
  CHECK(result.support.empty());

  // k2 below the recovered support size is a budget error.
  LinearModel model;
  model.beta = Vector::Zero(d);
  for (int j = 0; j < 5; ++j) model.beta(j) = 5.0;
  model.noise_sigma = 0.1;
  Rng noise2(215);
  const Vector strong = gen_responses(x, ResponseSpec{model, 0.0}, noise2);
  LabeledStream stream2(x, [&](long i) { return strong(i); });
  SparseTwoStageConfig tight;
  tight.k1 = 40;
  tight.k2 = 3;  // support will have 5 entries
  tight.sigma = 0.1;
  CHECK_THROWS_AS(run_sparse_two_stage(stream2, tight), BudgetError);

  SparseTwoStageConfig invalid;
  invalid.k1 = 0;
  invalid.k2 = 10;
  CHECK_THROWS_AS(run_sparse_two_stage(stream2, invalid), BudgetError);
}

TEST_CASE("refit_with_all uses stage-1 and stage-2 rows") {
  const int d = 8;
  Rng rng(216);
  const Matrix x =
      sample_observations(DistributionSpec::white_gaussian(d), 150, rng);
  LinearModel model;
  model.beta = Vector::Zero(d);
  model.beta(1) = 3.0;
  model.beta(6) = -2.0;
  model.noise_sigma = 0.3;
  Rng noise(217);
  const Vector y = gen_responses(x, ResponseSpec{model, 0.0}, noise);
  LabeledStream stream(x, [&](long i) { return y(i); });

  SparseTwoStageConfig config;
  config.k1 = 40;
  config.k2 = 20;
  config.sigma = 0.3;
  config.refit_with_all = true;
  const auto result = run_sparse_two_stage(stream, config);
  CHECK(result.fit.design_rows ==
        config.k1 + result.stage2_raw_support.rows());
}
