#include "oal/cli.hpp"

#include <cmath>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "oal/bounds.hpp"
#include "oal/harness.hpp"
#include "oal/selectors.hpp"

namespace oal {

namespace {

using ordered_json = nlohmann::ordered_json;

constexpr std::uint64_t kDefaultSeed = 20240101;  // fixed, never wall-clock

std::vector<double> parse_numeric_line(const std::string& line, long number) {
  std::string normalized = line;
  for (char& c : normalized) {
    if (c == ',' || c == '\t' || c == '\r') c = ' ';
  }
  std::istringstream ss(normalized);
  std::vector<double> out;
  std::string tok;
  while (ss >> tok) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(tok, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != tok.size()) {
      throw ParseError("input line " + std::to_string(number) + ": \"" + tok +
                       "\" is not a number");
    }
    out.push_back(v);
  }
  return out;
}

Matrix read_numeric_matrix(std::istream& in, const std::string& what) {
  std::vector<std::vector<double>> rows;
  std::string line;
  long number = 0;
  while (std::getline(in, line)) {
    ++number;
    auto vals = parse_numeric_line(line, number);
    if (vals.empty()) continue;
    if (!rows.empty() && vals.size() != rows.front().size()) {
      throw ParseError(what + ": line " + std::to_string(number) + " has " +
                       std::to_string(vals.size()) + " fields, expected " +
                       std::to_string(rows.front().size()));
    }
    rows.push_back(std::move(vals));
  }
  if (rows.empty()) throw ParseError(what + ": no rows");
  Matrix m(static_cast<long>(rows.size()),
           static_cast<long>(rows.front().size()));
  for (long i = 0; i < m.rows(); ++i) {
    for (long j = 0; j < m.cols(); ++j) {
      m(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    }
  }
  return m;
}

Matrix read_numeric_matrix_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path);
  return read_numeric_matrix(in, path);
}

ordered_json rule_to_json(const ThresholdRule& rule) {
  ordered_json j;
  j["method"] = to_string(rule.method);
  j["gamma"] = rule.gamma;
  j["gamma_sq"] = rule.gamma * rule.gamma;
  if (rule.phi) j["phi"] = *rule.phi;
  if (rule.clt_spread) j["clt_spread"] = *rule.clt_spread;
  j["converged"] = rule.converged;
  j["phi_ratio"] = rule.phi_ratio;
  j["weights"] = ordered_json::array();
  for (long i = 0; i < rule.weights.size(); ++i) {
    j["weights"].push_back(rule.weights(i));
  }
  return j;
}

ordered_json bound_to_json(const BoundReport& r) {
  ordered_json j;
  j["kind"] = to_string(r.kind);
  j["value"] = r.value;
  j["parameters"] = ordered_json::object();
  for (const auto& [key, value] : r.parameters) j["parameters"][key] = value;
  j["caveats"] = r.caveats;
  return j;
}

int cmd_experiment(const std::string& config_path,
                   const std::string& records_out,
                   const std::string& summary_out, int workers_override,
                   std::ostream& out) {
  ExperimentConfig config = ExperimentConfig::from_json_file(config_path);
  if (workers_override > 0) config.workers = workers_override;
  const ExperimentReport report = run_experiment(config);
  if (!records_out.empty()) {
    std::ofstream f(records_out);
    if (!f) throw ParseError("cannot open " + records_out + " for writing");
    report.write_records_csv(f);
  }
  if (!summary_out.empty()) {
    std::ofstream f(summary_out);
    if (!f) throw ParseError("cannot open " + summary_out + " for writing");
    report.write_summary_json(f);
  } else {
    report.write_summary_json(out);
  }
  return 0;
}

int cmd_threshold(int d, double n, double k, const std::string& method,
                  double c_bar, double m4, const std::string& sample_file,
                  std::ostream& out) {
  const ThresholdMethod m = threshold_method_from_string(method);
  ThresholdRule rule;
  switch (m) {
    case ThresholdMethod::zero:
      rule = ThresholdRule::random_sampling(d);
      break;
    case ThresholdMethod::gaussian_exact:
      rule = gaussian_threshold_for_quantile(
          d, k / n, GaussianThresholdMode::exact, c_bar);
      break;
    case ThresholdMethod::gaussian_closed_form:
      rule = gaussian_threshold_for_quantile(
          d, k / n, GaussianThresholdMode::closed_form, c_bar);
      break;
    case ThresholdMethod::clt:
      rule = clt_threshold_for_quantile(d, k / n, Vector::Constant(d, m4),
                                        Vector::Ones(d));
      break;
    case ThresholdMethod::empirical: {
      if (sample_file.empty()) {
        throw ParseError(
            "threshold: the empirical method needs --sample-file with "
            "whitened rows");
      }
      const Matrix sample = read_numeric_matrix_file(sample_file);
      if (sample.cols() != d) {
        throw ParseError("threshold: sample has " +
                         std::to_string(sample.cols()) +
                         " columns, expected d = " + std::to_string(d));
      }
      rule = solve_threshold_empirical(sample, k, n);
      break;
    }
  }
  out << rule_to_json(rule).dump(2) << '\n';
  return 0;
}

int cmd_select_stream(long n, long k, int d_flag, const std::string& method,
                      double gamma_flag, bool have_gamma,
                      const std::string& sigma_file, bool online_sigma,
                      bool adaptive, double c_bar, std::istream& in,
                      std::ostream& out) {
  std::string line;
  long number = 0;
  std::vector<double> first;
  while (std::getline(in, line)) {
    ++number;
    first = parse_numeric_line(line, number);
    if (!first.empty()) break;
  }
  if (first.empty()) return 0;  // empty stream, nothing to decide
  const int d = d_flag > 0 ? d_flag : static_cast<int>(first.size());

  std::optional<WhiteningTransform> whitener;
  if (!sigma_file.empty()) {
    const Matrix sigma = read_numeric_matrix_file(sigma_file);
    if (sigma.rows() != d || sigma.cols() != d) {
      throw ParseError("select-stream: --sigma-file must be a " +
                       std::to_string(d) + "x" + std::to_string(d) +
                       " matrix");
    }
    whitener = WhiteningTransform::from_covariance(SymMatrix(sigma),
                                                   CovarianceSource::exact);
  } else if (!online_sigma) {
    whitener = WhiteningTransform::identity(d);
  }

  const ThresholdMethod m = threshold_method_from_string(method);
  std::optional<ThresholdRule> fixed_rule;
  std::optional<WhiteningTransform> fixed_whitener;
  Selector selector = [&] {
    if (online_sigma || adaptive) {
      return Selector::adaptive(n, k, d, m,
                                online_sigma ? std::nullopt
                                             : std::move(whitener),
                                c_bar);
    }
    ThresholdRule rule;
    if (have_gamma) {
      rule.weights = Vector::Ones(d);
      rule.gamma = gamma_flag;
      rule.method = ThresholdMethod::gaussian_closed_form;
    } else {
      switch (m) {
        case ThresholdMethod::zero:
          rule = ThresholdRule::random_sampling(d);
          break;
        case ThresholdMethod::gaussian_closed_form:
          rule = gaussian_threshold(d, n, k,
                                    GaussianThresholdMode::closed_form, c_bar);
          break;
        default:
          rule = gaussian_threshold(d, n, k, GaussianThresholdMode::exact,
                                    c_bar);
          break;
      }
    }
    fixed_rule = rule;
    fixed_whitener = whitener;
    return Selector::fixed(n, k, rule, *whitener);
  }();

  const auto decide = [&](const std::vector<double>& vals) {
    if (static_cast<long>(vals.size()) != d) {
      throw ParseError("input line " + std::to_string(number) + ": expected " +
                       std::to_string(d) + " fields, found " +
                       std::to_string(vals.size()));
    }
    Vector x(d);
    for (int j = 0; j < d; ++j) x(j) = vals[static_cast<std::size_t>(j)];
    if (selector.finished()) {
      // Budget or stream exhausted: every further row is a skip.
      if (fixed_rule) {
        const double norm =
            std::sqrt(fixed_rule->weighted_sq_norm(fixed_whitener->apply(x)));
        out << "SKIP " << norm << ' ' << fixed_rule->gamma << '\n'
            << std::flush;
      } else {
        out << "SKIP nan nan\n" << std::flush;
      }
      return;
    }
    const SelectionDecision decision = selector.step(x);
    out << (decision.selected ? "SELECT " : "SKIP ") << decision.weighted_norm
        << ' ' << decision.threshold_used << '\n'
        << std::flush;
  };

  decide(first);
  while (std::getline(in, line)) {
    ++number;
    const auto vals = parse_numeric_line(line, number);
    if (vals.empty()) continue;
    decide(vals);
  }
  return 0;
}

int cmd_dataset_check(const std::string& path, const std::string& response,
                      double train_fraction, std::uint64_t seed,
                      bool center_full, std::ostream& out) {
  const CsvDataset ds = load_csv_dataset(path, response, train_fraction,
                                         std::nullopt, seed, center_full);
  ordered_json j;
  j["path"] = path;
  j["response_column"] = response;
  j["covariates"] = ds.covariate_names;
  j["degenerate_columns_dropped"] = ds.degenerate_columns;
  j["train_rows"] = ds.train_x.rows();
  j["test_rows"] = ds.test_x.rows();
  j["dim"] = ds.train_x.cols();
  j["centering"] = center_full ? "full" : "train";
  bool usable = true;
  try {
    const WhiteningTransform w = fit_covariance_batch(ds.train_x);
    j["covariance_condition_number"] = w.condition_number();
    const auto check = check_diag_trace_lemma(sample_covariance(ds.train_x));
    j["trace_inverse"] = check.trace_inverse;
    j["trace_diag_inverse"] = check.trace_diag_inverse;
  } catch (const Error& e) {
    usable = false;
    j["covariance_error"] = e.what();
  }
  j["usable"] = usable;
  out << j.dump(2) << '\n';
  if (!usable) throw RankError("dataset-check: training covariance unusable");
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::istream& in,
            std::ostream& out, std::ostream& err) {
  CLI::App app{"Threshold-based online active learning for linear regression"};
  app.require_subcommand(1);

  // experiment
  std::string config_path, records_out, summary_out;
  int workers_override = 0;
  auto* experiment =
      app.add_subcommand("experiment", "Run an experiment from a JSON config");
  experiment->add_option("--config", config_path, "Experiment config (JSON)")
      ->required();
  experiment->add_option("--records-out", records_out,
                         "Write per-replication records CSV here");
  experiment->add_option("--summary-out", summary_out,
                         "Write the summary JSON here instead of stdout");
  experiment->add_option("--workers", workers_override,
                         "Override the config worker count");

  // threshold
  int th_d = 0;
  double th_n = 0, th_k = 0, th_cbar = 1.0, th_m4 = 3.0;
  std::string th_method = "gaussian-exact", th_sample;
  auto* threshold =
      app.add_subcommand("threshold", "Print the selection rule for (d, n, k)");
  threshold->add_option("--d", th_d, "Dimension")->required();
  threshold->add_option("--n", th_n, "Stream length")->required();
  threshold->add_option("--k", th_k, "Label budget")->required();
  threshold->add_option("--method", th_method,
                        "gaussian-exact | gaussian-closed-form | clt | "
                        "empirical | zero");
  threshold->add_option("--c-bar", th_cbar, "Closed-form constant");
  threshold->add_option("--m4", th_m4,
                        "Whitened fourth moment for the CLT method");
  threshold->add_option("--sample-file", th_sample,
                        "Whitened sample rows for the empirical method");

  // bounds
  std::string bd_kind;
  int bd_d = 0, bd_s = 0;
  long bd_k = 0, bd_n = 0, bd_k2 = 0, bd_n2 = 0;
  double bd_alpha = 0.1, bd_phi = 1.0, bd_gamma = 0.0;
  double bd_lambda_min = 0.0, bd_R = 1.0, bd_sigma = 1.0, bd_beta_sq = 0.0;
  auto* bounds = app.add_subcommand("bounds", "Evaluate an MSE bound");
  bounds
      ->add_option("--kind", bd_kind,
                   "upper-main | upper-gaussian | upper-sparse | "
                   "lower-gaussian | lower-gaussian-hp | lower-clt | ridge-f")
      ->required();
  bounds->add_option("--d", bd_d, "Dimension");
  bounds->add_option("--k", bd_k, "Label budget");
  bounds->add_option("--n", bd_n, "Stream length");
  bounds->add_option("--alpha", bd_alpha, "Failure probability / slack");
  bounds->add_option("--phi", bd_phi, "Gain factor phi");
  bounds->add_option("--gamma", bd_gamma, "CLT spread gamma");
  bounds->add_option("--s", bd_s, "Sparsity (upper-sparse)");
  bounds->add_option("--k2", bd_k2, "Stage-2 budget (upper-sparse)");
  bounds->add_option("--n2", bd_n2, "Stage-2 stream length (upper-sparse)");
  bounds->add_option("--lambda-min", bd_lambda_min, "lambda_min (ridge-f)");
  bounds->add_option("--R", bd_R, "Penalty range upper end (ridge-f)");
  bounds->add_option("--sigma", bd_sigma, "Noise sd (ridge-f)");
  bounds->add_option("--beta-norm-sq", bd_beta_sq, "||beta*||^2 (ridge-f)");

  // select-stream
  long ss_n = 0, ss_k = 0;
  int ss_d = 0;
  double ss_gamma = 0.0, ss_cbar = 1.0;
  std::string ss_method = "gaussian-exact", ss_sigma_file;
  bool ss_online = false, ss_adaptive = false;
  std::uint64_t ss_seed = kDefaultSeed;
  auto* select = app.add_subcommand(
      "select-stream",
      "Read one observation per line and emit SELECT/SKIP decisions");
  select->add_option("--n", ss_n, "Stream length")->required();
  select->add_option("--k", ss_k, "Label budget")->required();
  select->add_option("--d", ss_d, "Dimension (default: from the first row)");
  select->add_option("--method", ss_method, "Threshold method");
  auto* gamma_opt =
      select->add_option("--gamma", ss_gamma, "Fixed threshold override");
  select->add_option("--sigma-file", ss_sigma_file,
                     "Known covariance matrix (whitespace/comma rows)");
  select->add_flag("--online-sigma", ss_online,
                   "Estimate the covariance online while streaming");
  select->add_flag("--adaptive", ss_adaptive,
                   "Recompute the threshold from the remaining budget");
  select->add_option("--c-bar", ss_cbar, "Closed-form constant");
  select->add_option("--seed", ss_seed,
                     "Seed for sample-based methods (fixed default)");

  // dataset-check
  std::string dc_path, dc_response, dc_center = "full";
  double dc_fraction = 0.8;
  std::uint64_t dc_seed = kDefaultSeed;
  auto* dataset =
      app.add_subcommand("dataset-check", "Validate and describe a CSV dataset");
  dataset->add_option("--csv", dc_path, "Dataset path")->required();
  dataset->add_option("--response", dc_response, "Response column name")
      ->required();
  dataset->add_option("--train-fraction", dc_fraction, "Train split fraction");
  dataset->add_option("--seed", dc_seed, "Shuffle seed (fixed default)");
  dataset->add_option("--center", dc_center,
                      "Centering statistics: full | train");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;  // usage errors exit 1, --help exits 0
  }

  try {
    if (*experiment) {
      return cmd_experiment(config_path, records_out, summary_out,
                            workers_override, out);
    }
    if (*threshold) {
      return cmd_threshold(th_d, th_n, th_k, th_method, th_cbar, th_m4,
                           th_sample, out);
    }
    if (*bounds) {
      BoundReport report;
      if (bd_kind == "upper-main") {
        report = upper_bound_main(bd_d, bd_k, bd_alpha, bd_phi);
      } else if (bd_kind == "upper-gaussian") {
        report = upper_bound_gaussian(bd_d, bd_k, bd_n, bd_alpha);
      } else if (bd_kind == "upper-sparse") {
        report = upper_bound_sparse(bd_s, bd_k2, bd_n2, bd_alpha);
      } else if (bd_kind == "lower-gaussian") {
        report = lower_bound_gaussian(bd_d, bd_k, bd_n);
      } else if (bd_kind == "lower-gaussian-hp") {
        report = lower_bound_gaussian_hp(bd_d, bd_k, bd_n, bd_alpha);
      } else if (bd_kind == "lower-clt") {
        report = lower_bound_clt(bd_d, bd_k, bd_n, bd_gamma);
      } else if (bd_kind == "ridge-f") {
        report.kind = BoundKind::ridge_f;
        report.value =
            ridge_mse_bound(bd_lambda_min, bd_R, bd_sigma, bd_d, bd_beta_sq);
        report.parameters = {{"lambda_min", bd_lambda_min},
                             {"R", bd_R},
                             {"sigma", bd_sigma},
                             {"d", double(bd_d)},
                             {"beta_norm_sq", bd_beta_sq}};
        report.caveats = {"penalty lambda* assumed uniform on [0, R]"};
      } else {
        err << "error: unknown bound kind \"" << bd_kind << "\"\n";
        return 1;
      }
      out << bound_to_json(report).dump(2) << '\n';
      return 0;
    }
    if (*select) {
      return cmd_select_stream(ss_n, ss_k, ss_d, ss_method, ss_gamma,
                               gamma_opt->count() > 0, ss_sigma_file,
                               ss_online, ss_adaptive, ss_cbar, in, out);
    }
    if (*dataset) {
      if (dc_center != "full" && dc_center != "train") {
        err << "error: --center must be \"full\" or \"train\"\n";
        return 1;
      }
      return cmd_dataset_check(dc_path, dc_response, dc_fraction, dc_seed,
                               dc_center == "full", out);
    }
  } catch (const ParseError& e) {
    // Malformed configs and inputs count as usage errors.
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
  err << "error: no subcommand\n";
  return 1;
}

}  // namespace oal
