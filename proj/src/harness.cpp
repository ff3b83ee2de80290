#include "oal/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <initializer_list>
#include <limits>
#include <ostream>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "oal/bounds.hpp"
#include "oal/selectors.hpp"
#include "oal/whitening.hpp"

namespace oal {

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

std::string to_string(Scenario s) {
  switch (s) {
    case Scenario::synthetic_linear: return "synthetic-linear";
    case Scenario::synthetic_nonlinear: return "synthetic-nonlinear";
    case Scenario::synthetic_sparse: return "synthetic-sparse";
    case Scenario::csv_dataset: return "csv-dataset";
  }
  return "unknown";
}

std::string to_string(Variant v) {
  switch (v) {
    case Variant::random_sampling: return "random-sampling";
    case Variant::fixed_threshold: return "fixed-threshold";
    case Variant::adaptive_threshold: return "adaptive-threshold";
    case Variant::sparse_two_stage: return "sparse-two-stage";
  }
  return "unknown";
}

std::string to_string(ThresholdMethod m) {
  switch (m) {
    case ThresholdMethod::gaussian_exact: return "gaussian-exact";
    case ThresholdMethod::gaussian_closed_form: return "gaussian-closed-form";
    case ThresholdMethod::clt: return "clt";
    case ThresholdMethod::empirical: return "empirical";
    case ThresholdMethod::zero: return "zero";
  }
  return "unknown";
}

Scenario scenario_from_string(const std::string& s) {
  if (s == "synthetic-linear") return Scenario::synthetic_linear;
  if (s == "synthetic-nonlinear") return Scenario::synthetic_nonlinear;
  if (s == "synthetic-sparse") return Scenario::synthetic_sparse;
  if (s == "csv-dataset") return Scenario::csv_dataset;
  throw ParseError("unknown scenario \"" + s + "\"");
}

Variant variant_from_string(const std::string& s) {
  if (s == "random-sampling" || s == "random") return Variant::random_sampling;
  if (s == "fixed-threshold" || s == "fixed") return Variant::fixed_threshold;
  if (s == "adaptive-threshold" || s == "adaptive")
    return Variant::adaptive_threshold;
  if (s == "sparse-two-stage" || s == "sparse")
    return Variant::sparse_two_stage;
  throw ParseError("unknown variant \"" + s + "\"");
}

ThresholdMethod threshold_method_from_string(const std::string& s) {
  if (s == "gaussian-exact") return ThresholdMethod::gaussian_exact;
  if (s == "gaussian-closed-form") return ThresholdMethod::gaussian_closed_form;
  if (s == "clt") return ThresholdMethod::clt;
  if (s == "empirical") return ThresholdMethod::empirical;
  if (s == "zero" || s == "random") return ThresholdMethod::zero;
  throw ParseError("unknown threshold method \"" + s + "\"");
}

namespace {

DistributionKind distribution_from_string(const std::string& s) {
  if (s == "gaussian") return DistributionKind::gaussian;
  if (s == "laplace-copula") return DistributionKind::laplace_copula;
  if (s == "uniform-white") return DistributionKind::uniform_white;
  throw ParseError("unknown distribution \"" + s + "\"");
}

std::string distribution_to_string(DistributionKind k) {
  switch (k) {
    case DistributionKind::gaussian: return "gaussian";
    case DistributionKind::laplace_copula: return "laplace-copula";
    case DistributionKind::uniform_white: return "uniform-white";
  }
  return "unknown";
}

FitMethod estimator_from_string(const std::string& s) {
  if (s == "ols") return FitMethod::ols;
  if (s == "ridge") return FitMethod::ridge;
  if (s == "lasso") return FitMethod::lasso;
  throw ParseError("unknown estimator \"" + s + "\"");
}

std::string estimator_to_string(FitMethod m) {
  switch (m) {
    case FitMethod::ols: return "ols";
    case FitMethod::ridge: return "ridge";
    case FitMethod::lasso: return "lasso";
  }
  return "unknown";
}

void reject_unknown_keys(const json& obj, const std::string& where,
                         std::initializer_list<const char*> allowed) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool ok = false;
    for (const char* key : allowed) ok = ok || it.key() == key;
    if (!ok) {
      throw ParseError("unknown key \"" + it.key() + "\" in " + where);
    }
  }
}

}  // namespace

long ExperimentConfig::resolve_k(const SchedulePoint& p) const {
  if (p.k) return *p.k;
  if (k_sqrt_rule) {
    return static_cast<long>(std::ceil(std::sqrt(static_cast<double>(p.n))));
  }
  return fixed_k;
}

void ExperimentConfig::validate() const {
  if (variants.empty()) throw ParseError("config: no variants requested");
  if (schedule.empty()) throw ParseError("config: empty schedule");
  if (replications < 1) throw ParseError("config: replications must be >= 1");
  if (workers < 1) throw ParseError("config: workers must be >= 1");
  const bool is_csv = scenario == Scenario::csv_dataset;
  if (is_csv) {
    if (csv.path.empty()) throw ParseError("config: csv.path is required");
    if (csv.response_column.empty()) {
      throw ParseError("config: csv.response_column is required");
    }
    if (!(csv.train_fraction > 0.0 && csv.train_fraction < 1.0)) {
      throw ParseError("config: csv.train_fraction must lie in (0, 1)");
    }
  } else {
    if (dim < 1) throw ParseError("config: dim must be >= 1");
    if (!(beta_lo < beta_hi)) {
      throw ParseError("config: beta range must satisfy lo < hi");
    }
    if (sparsity < 0 || sparsity > dim) {
      throw ParseError("config: sparsity must lie in [0, dim]");
    }
    if (scenario == Scenario::synthetic_sparse && sparsity < 1) {
      throw ParseError("config: the sparse scenario needs sparsity >= 1");
    }
    if (covariance.random_spd &&
        distribution == DistributionKind::uniform_white) {
      throw ParseError(
          "config: the uniform distribution is white by construction; a "
          "random covariance cannot be imposed on it");
    }
    if (covariance.random_spd &&
        !(covariance.lambda_min > 0.0 &&
          covariance.lambda_max >= covariance.lambda_min)) {
      throw ParseError("config: covariance eigenvalue range must satisfy "
                       "0 < lambda_min <= lambda_max");
    }
  }
  if (!(sigma >= 0.0)) throw ParseError("config: sigma must be >= 0");
  if (!(c_bar > 0.0)) throw ParseError("config: c_bar must be > 0");
  if (lambda < 0.0) throw ParseError("config: lambda must be >= 0");
  if (!(sparse.k1_fraction > 0.0 && sparse.k1_fraction < 1.0)) {
    throw ParseError("config: sparse.k1_fraction must lie in (0, 1)");
  }
  for (std::size_t i = 0; i < schedule.size(); ++i) {
    const auto& p = schedule[i];
    const std::string where = "schedule point " + std::to_string(i);
    if (!is_csv && p.n < 1) throw ParseError("config: " + where + ": n < 1");
    if (p.k && (*p.k < 1 || (!is_csv && *p.k > p.n))) {
      throw ParseError("config: " + where + ": need 1 <= k <= n");
    }
    if (!is_csv && !p.k && !k_sqrt_rule && (fixed_k < 1 || fixed_k > p.n)) {
      throw ParseError("config: " + where + ": fixed k outside [1, n]");
    }
  }
  for (const auto& [lo, hi] : quantile_pairs) {
    if (!(lo > 0.0 && lo < hi && hi < 1.0)) {
      throw ParseError("config: quantile pairs must satisfy 0 < lo < hi < 1");
    }
  }
}

ExperimentConfig ExperimentConfig::from_json_string(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("config: invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ParseError("config: top level must be an object");
  reject_unknown_keys(
      j, "config",
      {"scenario", "variants", "schedule", "k_rule", "replications", "seed",
       "dim", "distribution", "covariance", "sigma", "sparsity", "beta_range",
       "beta_min", "psi", "estimator", "lambda", "lambda_auto", "method",
       "c_bar", "online_sigma", "sparse", "csv", "quantile_pairs",
       "shared_data", "workers"});

  ExperimentConfig c;
  try {
    if (j.contains("scenario")) {
      c.scenario = scenario_from_string(j.at("scenario").get<std::string>());
    }
    for (const auto& v : j.value("variants", json::array())) {
      c.variants.push_back(variant_from_string(v.get<std::string>()));
    }
    for (const auto& p : j.value("schedule", json::array())) {
      reject_unknown_keys(p, "schedule point", {"n", "k", "psi"});
      SchedulePoint sp;
      sp.n = p.value("n", 0L);
      if (p.contains("k")) sp.k = p.at("k").get<long>();
      if (p.contains("psi")) sp.psi = p.at("psi").get<double>();
      c.schedule.push_back(sp);
    }
    if (j.contains("k_rule")) {
      const auto& kr = j.at("k_rule");
      if (kr.is_string() && kr.get<std::string>() == "sqrt") {
        c.k_sqrt_rule = true;
      } else if (kr.is_number_integer()) {
        c.k_sqrt_rule = false;
        c.fixed_k = kr.get<long>();
      } else {
        throw ParseError("config: k_rule must be \"sqrt\" or an integer");
      }
    }
    c.replications = j.value("replications", c.replications);
    c.seed = j.value("seed", c.seed);
    c.dim = j.value("dim", c.dim);
    if (j.contains("distribution")) {
      c.distribution =
          distribution_from_string(j.at("distribution").get<std::string>());
    }
    if (j.contains("covariance")) {
      const auto& cov = j.at("covariance");
      reject_unknown_keys(cov, "covariance",
                          {"type", "lambda_min", "lambda_max"});
      const std::string type = cov.value("type", "identity");
      if (type == "random-spd") {
        c.covariance.random_spd = true;
      } else if (type != "identity") {
        throw ParseError("unknown covariance type \"" + type + "\"");
      }
      c.covariance.lambda_min =
          cov.value("lambda_min", c.covariance.lambda_min);
      c.covariance.lambda_max =
          cov.value("lambda_max", c.covariance.lambda_max);
    }
    c.sigma = j.value("sigma", c.sigma);
    c.sparsity = j.value("sparsity", c.sparsity);
    if (j.contains("beta_range")) {
      const auto& br = j.at("beta_range");
      if (!br.is_array() || br.size() != 2) {
        throw ParseError("config: beta_range must be [lo, hi]");
      }
      c.beta_lo = br[0].get<double>();
      c.beta_hi = br[1].get<double>();
    }
    c.beta_min = j.value("beta_min", c.beta_min);
    c.psi = j.value("psi", c.psi);
    if (j.contains("estimator")) {
      c.estimator = estimator_from_string(j.at("estimator").get<std::string>());
    }
    c.lambda = j.value("lambda", c.lambda);
    c.lambda_auto = j.value("lambda_auto", c.lambda_auto);
    if (j.contains("method")) {
      c.method =
          threshold_method_from_string(j.at("method").get<std::string>());
    }
    c.c_bar = j.value("c_bar", c.c_bar);
    c.online_sigma = j.value("online_sigma", c.online_sigma);
    if (j.contains("sparse")) {
      const auto& sp = j.at("sparse");
      reject_unknown_keys(
          sp, "sparse",
          {"k1_fraction", "support_threshold", "c", "refit_with_all"});
      c.sparse.k1_fraction = sp.value("k1_fraction", c.sparse.k1_fraction);
      c.sparse.support_threshold =
          sp.value("support_threshold", c.sparse.support_threshold);
      c.sparse.c_gamma = sp.value("c", c.sparse.c_gamma);
      c.sparse.refit_with_all =
          sp.value("refit_with_all", c.sparse.refit_with_all);
    }
    if (j.contains("csv")) {
      const auto& cs = j.at("csv");
      reject_unknown_keys(cs, "csv",
                          {"path", "response_column", "train_fraction",
                           "center"});
      c.csv.path = cs.value("path", c.csv.path);
      c.csv.response_column =
          cs.value("response_column", c.csv.response_column);
      c.csv.train_fraction = cs.value("train_fraction", c.csv.train_fraction);
      const std::string center = cs.value("center", "full");
      if (center == "full") {
        c.csv.center_full_dataset = true;
      } else if (center == "train") {
        c.csv.center_full_dataset = false;
      } else {
        throw ParseError("config: csv.center must be \"full\" or \"train\"");
      }
    }
    if (j.contains("quantile_pairs")) {
      c.quantile_pairs.clear();
      for (const auto& qp : j.at("quantile_pairs")) {
        if (!qp.is_array() || qp.size() != 2) {
          throw ParseError("config: quantile_pairs entries must be [lo, hi]");
        }
        c.quantile_pairs.emplace_back(qp[0].get<double>(),
                                      qp[1].get<double>());
      }
    }
    c.shared_data_across_variants = j.value("shared_data", true);
    c.workers = j.value("workers", c.workers);
  } catch (const json::exception& e) {
    throw ParseError(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

ExperimentConfig ExperimentConfig::from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("config: cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return from_json_string(buf.str());
}

double mse_sigma_norm(const LinearFit& fit, const LinearModel& model,
                      const SymMatrix& sigma) {
  const int d = static_cast<int>(model.beta.size());
  if (sigma.dim() != d) {
    throw ShapeError("mse_sigma_norm: Sigma/model dimension mismatch");
  }
  const Vector delta = fit.embed(d) - model.beta;
  return delta.dot(sigma.mat() * delta);
}

// ---------------------------------------------------------------------------
// CSV loading

namespace {

struct RawCsv {
  Matrix covariates;
  Vector response;
  std::vector<std::string> covariate_names;
  std::vector<std::string> degenerate_columns;
};

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) {
    const auto b = field.find_first_not_of(" \t\r");
    const auto e = field.find_last_not_of(" \t\r");
    fields.push_back(b == std::string::npos
                         ? std::string()
                         : field.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

double parse_field(const std::string& field, long row,
                   const std::string& column) {
  std::size_t used = 0;
  double value = 0.0;
  try {
    value = std::stod(field, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != field.size() || field.empty()) {
    throw ParseError("csv row " + std::to_string(row) + ", column \"" +
                     column + "\": \"" + field + "\" is not a number");
  }
  return value;
}

RawCsv parse_csv_file(const std::string& path,
                      const std::string& response_column) {
  std::ifstream in(path);
  if (!in) throw ParseError("csv: cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw ParseError("csv: empty file " + path);
  const std::vector<std::string> header = split_csv_line(line);
  long response_index = -1;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == response_column) response_index = static_cast<long>(i);
  }
  if (response_index < 0) {
    throw ParseError("csv: response column \"" + response_column +
                     "\" not found in header");
  }

  std::vector<std::vector<double>> rows;
  long row_number = 1;  // header was row 1
  while (std::getline(in, line)) {
    ++row_number;
    if (line.empty() || line == "\r") continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != header.size()) {
      throw ParseError("csv row " + std::to_string(row_number) + ": expected " +
                       std::to_string(header.size()) + " fields, found " +
                       std::to_string(fields.size()));
    }
    std::vector<double> parsed(fields.size());
    for (std::size_t i = 0; i < fields.size(); ++i) {
      parsed[i] = parse_field(fields[i], row_number, header[i]);
    }
    rows.push_back(std::move(parsed));
  }
  if (rows.size() < 2) throw ParseError("csv: fewer than 2 data rows");

  // Constant covariates cannot be whitened; drop them and report which.
  RawCsv out;
  std::vector<long> keep;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (static_cast<long>(c) == response_index) continue;
    double lo = rows[0][c], hi = rows[0][c];
    for (const auto& r : rows) {
      lo = std::min(lo, r[c]);
      hi = std::max(hi, r[c]);
    }
    if (hi > lo) {
      keep.push_back(static_cast<long>(c));
      out.covariate_names.push_back(header[c]);
    } else {
      out.degenerate_columns.push_back(header[c]);
    }
  }
  if (keep.empty()) throw ParseError("csv: no non-constant covariates");

  const long n = static_cast<long>(rows.size());
  out.covariates.resize(n, static_cast<long>(keep.size()));
  out.response.resize(n);
  for (long i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < keep.size(); ++j) {
      out.covariates(i, static_cast<long>(j)) = rows[i][keep[j]];
    }
    out.response(i) = rows[i][response_index];
  }
  return out;
}

CsvDataset split_and_center(const RawCsv& raw, double train_fraction,
                            std::optional<long> train_n, std::uint64_t seed,
                            bool center_full_dataset) {
  const long n = raw.covariates.rows();
  long nt = train_n ? *train_n
                    : static_cast<long>(std::floor(train_fraction * n));
  if (nt < 1 || nt >= n) {
    throw ParseError("csv: train split size " + std::to_string(nt) +
                     " leaves no test rows (dataset has " + std::to_string(n) +
                     ")");
  }
  Rng rng(seed);
  const auto perm = rng.permutation(static_cast<std::size_t>(n));

  CsvDataset out;
  out.covariate_names = raw.covariate_names;
  out.degenerate_columns = raw.degenerate_columns;
  const long d = raw.covariates.cols();
  out.train_x.resize(nt, d);
  out.train_y.resize(nt);
  out.test_x.resize(n - nt, d);
  out.test_y.resize(n - nt);
  for (long i = 0; i < n; ++i) {
    const auto src = static_cast<long>(perm[static_cast<std::size_t>(i)]);
    if (i < nt) {
      out.train_x.row(i) = raw.covariates.row(src);
      out.train_y(i) = raw.response(src);
    } else {
      out.test_x.row(i - nt) = raw.covariates.row(src);
      out.test_y(i - nt) = raw.response(src);
    }
  }

  Vector x_mean;
  double y_mean;
  if (center_full_dataset) {
    x_mean = raw.covariates.colwise().mean().transpose();
    y_mean = raw.response.mean();
  } else {
    x_mean = out.train_x.colwise().mean().transpose();
    y_mean = out.train_y.mean();
  }
  out.train_x.rowwise() -= x_mean.transpose();
  out.test_x.rowwise() -= x_mean.transpose();
  out.train_y.array() -= y_mean;
  out.test_y.array() -= y_mean;
  return out;
}

}  // namespace

CsvDataset load_csv_dataset(const std::string& path,
                            const std::string& response_column,
                            double train_fraction, std::optional<long> train_n,
                            std::uint64_t seed, bool center_full_dataset) {
  return split_and_center(parse_csv_file(path, response_column),
                          train_fraction, train_n, seed, center_full_dataset);
}

// ---------------------------------------------------------------------------
// Experiment driver

namespace {

LinearFit fit_estimator(const Matrix& X, const Vector& y,
                        const ExperimentConfig& config, long k) {
  switch (config.estimator) {
    case FitMethod::ols:
      return fit_ols(X, y);
    case FitMethod::ridge:
      return fit_ridge(X, y, config.lambda);
    case FitMethod::lasso: {
      const double lambda =
          config.lambda_auto
              ? lasso_regularization(config.sigma,
                                     static_cast<int>(X.cols()), k)
              : config.lambda;
      return fit_lasso(X, y, lambda);
    }
  }
  throw StateError("fit_estimator: unreachable");
}

Vector analytic_fourth_moments(DistributionKind kind, int d) {
  switch (kind) {
    case DistributionKind::gaussian:
      return Vector::Constant(d, 3.0);
    case DistributionKind::uniform_white:
      return Vector::Constant(d, 9.0 / 5.0);
    case DistributionKind::laplace_copula:
      return Vector();  // no closed form for the whitened coordinates
  }
  return Vector();
}

Vector sample_fourth_moments(const Matrix& whitened) {
  return whitened.array().pow(4).colwise().mean().transpose();
}

/// Fixed-rule construction shared by the synthetic and CSV paths. The
/// pre-sample is only consulted by the CLT (when no analytic moments exist)
/// and empirical methods.
ThresholdRule build_fixed_rule(const ExperimentConfig& config, int d, long n,
                               long k, const Matrix& whitened_presample,
                               DistributionKind kind) {
  switch (config.method) {
    case ThresholdMethod::zero:
      return ThresholdRule::random_sampling(d);
    case ThresholdMethod::gaussian_exact:
      return gaussian_threshold(d, n, k, GaussianThresholdMode::exact,
                                config.c_bar);
    case ThresholdMethod::gaussian_closed_form:
      return gaussian_threshold(d, n, k, GaussianThresholdMode::closed_form,
                                config.c_bar);
    case ThresholdMethod::clt: {
      Vector m4 = analytic_fourth_moments(kind, d);
      if (m4.size() == 0) m4 = sample_fourth_moments(whitened_presample);
      return clt_threshold(d, n, k, m4, Vector::Ones(d));
    }
    case ThresholdMethod::empirical:
      return solve_threshold_empirical(whitened_presample,
                                       static_cast<double>(k),
                                       static_cast<double>(n));
  }
  throw StateError("build_fixed_rule: unreachable");
}

struct SelectionResult {
  Matrix X;
  Vector y;
  long selected = 0;
};

SelectionResult collect_selected(Selector& selector, const Matrix& X,
                                 const Vector& y) {
  const long n = X.rows();
  for (long i = 0; i < n && !selector.finished(); ++i) {
    selector.step(X.row(i).transpose());
  }
  const auto& idx = selector.selected_indices();
  SelectionResult out;
  out.selected = static_cast<long>(idx.size());
  out.X.resize(out.selected, X.cols());
  out.y.resize(out.selected);
  for (long i = 0; i < out.selected; ++i) {
    out.X.row(i) = X.row(idx[static_cast<std::size_t>(i)]);
    out.y(i) = y(idx[static_cast<std::size_t>(i)]);
  }
  return out;
}

SparseTwoStageConfig make_sparse_config(const ExperimentConfig& config, long k,
                                        std::optional<SymMatrix> exact_cov) {
  SparseTwoStageConfig sc;
  sc.k1 = std::clamp<long>(
      std::lround(config.sparse.k1_fraction * static_cast<double>(k)), 1,
      k - 1);
  sc.k2 = k - sc.k1;
  sc.sigma = config.sigma;
  sc.support_threshold = config.sparse.support_threshold;
  sc.c_gamma = config.sparse.c_gamma;
  sc.refit_with_all = config.sparse.refit_with_all;
  sc.exact_covariance = std::move(exact_cov);
  return sc;
}

}  // namespace

ExperimentReport run_experiment(const ExperimentConfig& config) {
  config.validate();
  const bool is_csv = config.scenario == Scenario::csv_dataset;
  const auto points = static_cast<long>(config.schedule.size());
  const auto n_variants = static_cast<long>(config.variants.size());
  const long reps = config.replications;

  const Rng base(config.seed);

  // Scenario-level fixtures: the ambient covariance for synthetic data, the
  // parsed table for CSV data. Both are shared by every task.
  std::optional<RawCsv> raw_csv;
  std::optional<SymMatrix> sigma_cov;
  std::optional<DistributionSpec> dist;
  if (is_csv) {
    raw_csv = parse_csv_file(config.csv.path, config.csv.response_column);
  } else {
    if (config.covariance.random_spd) {
      Rng cov_rng = base.split(0xC0A0);
      sigma_cov = random_spd(config.dim, config.covariance.lambda_min,
                             config.covariance.lambda_max, cov_rng);
    } else {
      sigma_cov = SymMatrix::identity(config.dim);
    }
    DistributionSpec ds;
    ds.kind = config.distribution;
    ds.dim = config.dim;
    if (config.covariance.random_spd) ds.covariance = *sigma_cov;
    dist = ds;
  }

  std::vector<MetricRecord> records(
      static_cast<std::size_t>(points * n_variants * reps));
  const auto slot = [&](long p, long v, long r) -> MetricRecord& {
    return records[static_cast<std::size_t>((p * n_variants + v) * reps + r)];
  };

  const auto run_one_variant = [&](Variant variant, const Matrix& X,
                                   const Vector& y, long n, long k, int d,
                                   const WhiteningTransform& known_whitener,
                                   const Matrix& whitened_presample,
                                   DistributionKind kind) -> std::pair<LinearFit, long> {
    switch (variant) {
      case Variant::random_sampling: {
        Selector sel = Selector::fixed(n, k, ThresholdRule::random_sampling(d),
                                       WhiteningTransform::identity(d));
        auto got = collect_selected(sel, X, y);
        return {fit_estimator(got.X, got.y, config, k), got.selected};
      }
      case Variant::fixed_threshold: {
        const ThresholdRule rule = build_fixed_rule(config, d, n, k,
                                                    whitened_presample, kind);
        Selector sel = Selector::fixed(n, k, rule, known_whitener);
        auto got = collect_selected(sel, X, y);
        return {fit_estimator(got.X, got.y, config, k), got.selected};
      }
      case Variant::adaptive_threshold: {
        std::optional<Vector> m4;
        if (config.method == ThresholdMethod::clt) {
          Vector m = analytic_fourth_moments(kind, d);
          if (m.size() == 0) m = sample_fourth_moments(whitened_presample);
          m4 = m;
        }
        std::optional<WhiteningTransform> whitener;
        if (!config.online_sigma) whitener = known_whitener;
        Selector sel = Selector::adaptive(n, k, d, config.method,
                                          std::move(whitener), config.c_bar,
                                          std::move(m4));
        auto got = collect_selected(sel, X, y);
        return {fit_estimator(got.X, got.y, config, k), got.selected};
      }
      case Variant::sparse_two_stage: {
        std::optional<SymMatrix> exact;
        if (!is_csv) exact = *sigma_cov;
        const auto sc = make_sparse_config(config, k, std::move(exact));
        LabeledStream stream(X, [&y](long i) { return y(i); });
        auto result = run_sparse_two_stage(stream, sc);
        const long labeled =
            sc.k1 + (result.fallback_random_stage2
                         ? sc.k2
                         : result.stage2_raw_support.rows());
        return {std::move(result.fit), labeled};
      }
    }
    throw StateError("run_one_variant: unreachable");
  };

  const auto run_task = [&](long p, long r) {
    const SchedulePoint& point = config.schedule[p];

    const auto run_bundle = [&](long v_begin, long v_end, std::uint64_t key) {
      // Everything inside one bundle shares covariates, model, and noise so
      // that variant comparisons are paired.
      Rng task_rng = base.split(static_cast<std::uint64_t>(p) + 1,
                                static_cast<std::uint64_t>(r) + 1, key);
      Rng rx = task_rng.split(1);
      Rng rm = task_rng.split(2);
      Rng rn = task_rng.split(3);
      Rng rp = task_rng.split(4);

      long n = 0, k = 0;
      int d = 0;
      Matrix X;
      Vector y;
      double psi = point.psi.value_or(config.psi);
      LinearModel model;
      std::optional<WhiteningTransform> whitener;
      std::optional<CsvDataset> split;

      if (is_csv) {
        psi = 0.0;
        std::optional<long> train_n;
        if (point.n > 0) train_n = point.n;
        std::uint64_t split_seed = task_rng.split(5).next_u64();
        split = split_and_center(*raw_csv, config.csv.train_fraction, train_n,
                                 split_seed, config.csv.center_full_dataset);
        X = split->train_x;
        y = split->train_y;
        n = X.rows();
        d = static_cast<int>(X.cols());
        SchedulePoint effective = point;
        effective.n = n;
        k = config.resolve_k(effective);
        whitener = fit_covariance_batch(X);
      } else {
        n = point.n;
        d = config.dim;
        k = config.resolve_k(point);
        X = sample_observations(*dist, n, rx);
        model = make_model(d, config.sparsity > 0 ? config.sparsity : d,
                           config.beta_lo, config.beta_hi, config.sigma, rm);
        if (config.beta_min > 0.0) {
          for (long j = 0; j < model.beta.size(); ++j) {
            const double b = model.beta(j);
            if (b != 0.0 && std::abs(b) < config.beta_min) {
              model.beta(j) = (b < 0 ? -1.0 : 1.0) * config.beta_min;
            }
          }
        }
        y = gen_responses(X, ResponseSpec{model, psi}, rn);
        whitener = WhiteningTransform::from_covariance(
            *sigma_cov, CovarianceSource::exact);
      }

      // Pre-sample for the sample-based threshold methods: fresh synthetic
      // draws when the generator is known, the (label-free) training
      // covariates otherwise.
      Matrix whitened_presample;
      const bool needs_presample =
          config.method == ThresholdMethod::empirical ||
          (config.method == ThresholdMethod::clt &&
           (is_csv ||
            config.distribution == DistributionKind::laplace_copula));
      if (needs_presample) {
        if (is_csv) {
          whitened_presample = whitener->apply_rows(X);
        } else {
          const long m = std::max<long>(50L * d, 4000);
          whitened_presample =
              whitener->apply_rows(sample_observations(*dist, m, rp));
        }
      }

      for (long v = v_begin; v < v_end; ++v) {
        MetricRecord& rec = slot(p, v, r);
        rec.point_index = static_cast<int>(p);
        rec.n = n;
        rec.k = k;
        rec.psi = psi;
        rec.variant = config.variants[static_cast<std::size_t>(v)];
        rec.replication = r;
        try {
          auto [fit, labeled] =
              run_one_variant(rec.variant, X, y, n, k, d, *whitener,
                              whitened_presample,
                              is_csv ? DistributionKind::gaussian
                                     : config.distribution);
          rec.selected = labeled;
          if (is_csv) {
            const Vector beta = fit.embed(d);
            rec.metric =
                (split->test_x * beta - split->test_y).squaredNorm() /
                static_cast<double>(split->test_y.size());
          } else {
            rec.metric = mse_sigma_norm(fit, model, *sigma_cov);
          }
        } catch (const std::exception& e) {
          rec.failed = true;
          rec.error = e.what();
          rec.metric = std::numeric_limits<double>::quiet_NaN();
        }
      }
    };

    if (config.shared_data_across_variants) {
      run_bundle(0, n_variants, 0);
    } else {
      for (long v = 0; v < n_variants; ++v) {
        run_bundle(v, v + 1, static_cast<std::uint64_t>(v) + 1);
      }
    }
  };

  const long task_count = points * reps;
  std::atomic<long> next{0};
  const auto worker = [&] {
    for (;;) {
      const long t = next.fetch_add(1);
      if (t >= task_count) break;
      run_task(t / reps, t % reps);
    }
  };
  const int n_threads =
      static_cast<int>(std::min<long>(config.workers, task_count));
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(n_threads));
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  ExperimentReport report;
  report.config = config;
  report.records = std::move(records);
  report.summary = summarize_report(config, report.records);
  return report;
}

std::vector<SummaryCell> summarize_report(
    const ExperimentConfig& config, const std::vector<MetricRecord>& records) {
  const auto points = static_cast<long>(config.schedule.size());
  const auto n_variants = static_cast<long>(config.variants.size());
  std::vector<SummaryCell> cells;
  cells.reserve(static_cast<std::size_t>(points * n_variants));
  for (long p = 0; p < points; ++p) {
    for (long v = 0; v < n_variants; ++v) {
      SummaryCell cell;
      cell.point_index = static_cast<int>(p);
      cell.variant = config.variants[static_cast<std::size_t>(v)];
      std::vector<double> values;
      for (const auto& rec : records) {
        if (rec.point_index != p || rec.variant != cell.variant) continue;
        cell.n = rec.n;
        cell.k = rec.k;
        cell.psi = rec.psi;
        if (rec.failed) {
          ++cell.failures;
        } else {
          values.push_back(rec.metric);
          ++cell.successes;
        }
      }
      if (!values.empty()) {
        double sum = 0.0;
        for (double x : values) sum += x;
        cell.mean = sum / static_cast<double>(values.size());
        cell.median = empirical_quantile(values, 0.5);
        for (const auto& [lo, hi] : config.quantile_pairs) {
          cell.quantiles.emplace_back(empirical_quantile(values, lo),
                                      empirical_quantile(values, hi));
        }
      } else {
        cell.mean = std::numeric_limits<double>::quiet_NaN();
        cell.median = cell.mean;
        for (std::size_t i = 0; i < config.quantile_pairs.size(); ++i) {
          cell.quantiles.emplace_back(cell.mean, cell.mean);
        }
      }
      cells.push_back(std::move(cell));
    }
  }
  return cells;
}

namespace {

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::string format_double(double x) {
  if (std::isnan(x)) return "";
  std::ostringstream ss;
  ss.precision(17);
  ss << x;
  return ss.str();
}

}  // namespace

void ExperimentReport::write_records_csv(std::ostream& out) const {
  out << "point,n,k,psi,variant,replication,metric,selected,failed,error\n";
  for (const auto& r : records) {
    out << r.point_index << ',' << r.n << ',' << r.k << ','
        << format_double(r.psi) << ',' << to_string(r.variant) << ','
        << r.replication << ',' << format_double(r.metric) << ',' << r.selected
        << ',' << (r.failed ? 1 : 0) << ',' << csv_escape(r.error) << '\n';
  }
}

void ExperimentReport::write_summary_json(std::ostream& out) const {
  ordered_json j;
  j["config"] = {
      {"scenario", to_string(config.scenario)},
      {"dim", config.dim},
      {"distribution", distribution_to_string(config.distribution)},
      {"sigma", config.sigma},
      {"sparsity", config.sparsity},
      {"method", to_string(config.method)},
      {"estimator", estimator_to_string(config.estimator)},
      {"replications", config.replications},
      {"seed", config.seed},
  };
  j["cells"] = ordered_json::array();
  for (const auto& c : summary) {
    ordered_json cell = {
        {"point", c.point_index},
        {"n", c.n},
        {"k", c.k},
        {"psi", c.psi},
        {"variant", to_string(c.variant)},
        {"successes", c.successes},
        {"failures", c.failures},
    };
    cell["mean"] = std::isnan(c.mean) ? ordered_json() : ordered_json(c.mean);
    cell["median"] =
        std::isnan(c.median) ? ordered_json() : ordered_json(c.median);
    cell["quantiles"] = ordered_json::array();
    for (std::size_t i = 0; i < c.quantiles.size(); ++i) {
      const auto& [lo, hi] = c.quantiles[i];
      cell["quantiles"].push_back(
          {{"lo_p", config.quantile_pairs[i].first},
           {"hi_p", config.quantile_pairs[i].second},
           {"lo", std::isnan(lo) ? ordered_json() : ordered_json(lo)},
           {"hi", std::isnan(hi) ? ordered_json() : ordered_json(hi)}});
    }
    j["cells"].push_back(std::move(cell));
  }
  out << j.dump(2) << '\n';
}

}  // namespace oal
