#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "oal/datagen.hpp"
#include "oal/estimators.hpp"
#include "oal/thresholds.hpp"

namespace oal {

enum class Scenario {
  synthetic_linear,
  synthetic_nonlinear,
  synthetic_sparse,
  csv_dataset
};

enum class Variant {
  random_sampling,
  fixed_threshold,
  adaptive_threshold,
  sparse_two_stage
};

std::string to_string(Scenario s);
std::string to_string(Variant v);
std::string to_string(ThresholdMethod m);
Scenario scenario_from_string(const std::string& s);
Variant variant_from_string(const std::string& s);
ThresholdMethod threshold_method_from_string(const std::string& s);

/// One point of the n schedule; k defaults to the config k rule and psi to
/// the config nonlinearity.
struct SchedulePoint {
  long n = 0;
  std::optional<long> k;
  std::optional<double> psi;
};

struct CovarianceSpec {
  bool random_spd = false;  // false = identity
  double lambda_min = 0.5;
  double lambda_max = 3.0;
};

struct SparseOptions {
  double k1_fraction = 2.0 / 3.0;
  double support_threshold = 1e-8;
  double c_gamma = 1.0;
  bool refit_with_all = false;
};

struct CsvOptions {
  std::string path;
  std::string response_column;
  double train_fraction = 0.8;  // used when a schedule point has no n
  bool center_full_dataset = true;  // false: center by train statistics only
};

struct ExperimentConfig {
  Scenario scenario = Scenario::synthetic_linear;
  std::vector<Variant> variants;
  std::vector<SchedulePoint> schedule;
  bool k_sqrt_rule = true;  // k = ceil(sqrt(n)) unless a point pins k
  long fixed_k = 0;         // used when k_sqrt_rule is false
  long replications = 1;
  std::uint64_t seed = 20240101;  // documented default, never wall-clock

  int dim = 10;
  DistributionKind distribution = DistributionKind::gaussian;
  CovarianceSpec covariance;
  double sigma = 1.0;
  int sparsity = 0;  // 0 = dense model
  double beta_lo = -5.0, beta_hi = 5.0;
  double beta_min = 0.0;  // floor on |beta_j| over the support
  double psi = 0.0;

  FitMethod estimator = FitMethod::ols;
  double lambda = 0.0;
  bool lambda_auto = false;  // lasso lambda from the two-stage rule at (sigma, d, k)

  ThresholdMethod method = ThresholdMethod::gaussian_exact;
  double c_bar = 1.0;
  bool online_sigma = true;  // adaptive variant estimates Sigma online

  SparseOptions sparse;
  CsvOptions csv;

  std::vector<std::pair<double, double>> quantile_pairs = {{0.05, 0.95}};
  bool shared_data_across_variants = true;
  int workers = 1;

  long resolve_k(const SchedulePoint& p) const;
  void validate() const;

  static ExperimentConfig from_json_file(const std::string& path);
  static ExperimentConfig from_json_string(const std::string& text);
};

struct MetricRecord {
  int point_index = 0;
  long n = 0;
  long k = 0;
  double psi = 0.0;
  Variant variant = Variant::random_sampling;
  long replication = 0;
  double metric = 0.0;
  long selected = 0;
  bool failed = false;
  std::string error;
};

struct SummaryCell {
  int point_index = 0;
  long n = 0;
  long k = 0;
  double psi = 0.0;
  Variant variant = Variant::random_sampling;
  long successes = 0;
  long failures = 0;
  double mean = 0.0;
  double median = 0.0;
  // one (lower, upper) per configured quantile pair
  std::vector<std::pair<double, double>> quantiles;
};

struct ExperimentReport {
  ExperimentConfig config;
  std::vector<MetricRecord> records;
  std::vector<SummaryCell> summary;

  void write_records_csv(std::ostream& out) const;
  void write_summary_json(std::ostream& out) const;
};

/// Train/test split of a CSV dataset, centered per the configured mode.
struct CsvDataset {
  Matrix train_x;
  Vector train_y;
  Matrix test_x;
  Vector test_y;
  std::vector<std::string> covariate_names;
  std::vector<std::string> degenerate_columns;  // constant covariates
};

/// Shuffle by seed, split (train fraction or explicit n), and center.
CsvDataset load_csv_dataset(const std::string& path,
                            const std::string& response_column,
                            double train_fraction, std::optional<long> train_n,
                            std::uint64_t seed, bool center_full_dataset);

/// Sigma-norm MSE (beta_hat - beta*)^T Sigma (beta_hat - beta*); restricted
/// fits are embedded with zeros off-support.
double mse_sigma_norm(const LinearFit& fit, const LinearModel& model,
                      const SymMatrix& sigma);

ExperimentReport run_experiment(const ExperimentConfig& config);

std::vector<SummaryCell> summarize_report(
    const ExperimentConfig& config, const std::vector<MetricRecord>& records);

}  // namespace oal
