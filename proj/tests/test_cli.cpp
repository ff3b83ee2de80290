#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <vector>

#include "doctest.h"
#include "json.hpp"
#include "oal/cli.hpp"
#include "oal/rng.hpp"

using namespace oal;
using nlohmann::json;

namespace {

struct CliResult {
  int code = 0;
  std::string out;
  std::string err;
};

CliResult run(const std::vector<std::string>& args,
              const std::string& input = "") {
  std::istringstream in(input);
  std::ostringstream out, err;
  CliResult r;
  r.code = run_cli(args, in, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

struct TempFile {
  std::filesystem::path path;
  explicit TempFile(const std::string& name, const std::string& contents) {
    path = std::filesystem::temp_directory_path() / name;
    std::ofstream f(path);
    f << contents;
  }
  ~TempFile() { std::filesystem::remove(path); }
};

}  // namespace

TEST_CASE("threshold subcommand prints the closed-form rule") {
  // d = 10, n/k = e^5: Gamma = sqrt(d + 2 log(n/k)) = sqrt(20).
  const double ratio = std::exp(5.0);
  const auto r = run({"threshold", "--d", "10", "--n",
                      std::to_string(1000.0 * ratio), "--k", "1000",
                      "--method", "gaussian-closed-form"});
  REQUIRE(r.code == 0);
  const json j = json::parse(r.out);
  CHECK(j["method"] == "gaussian-closed-form");
  CHECK(std::abs(j["gamma"].get<double>() - std::sqrt(20.0)) < 1e-9);
  CHECK(std::abs(j["gamma_sq"].get<double>() - 20.0) < 1e-8);
  REQUIRE(j["weights"].size() == 10);
  double sum = 0.0;
  for (const auto& w : j["weights"]) sum += w.get<double>();
  CHECK(std::abs(sum - 10.0) < 1e-12);
}

TEST_CASE("threshold exact method matches the chi-square quantile identity") {
  const auto r = run({"threshold", "--d", "4", "--n", "100", "--k", "100",
                      "--method", "gaussian-exact"});
  REQUIRE(r.code == 0);
  const json j = json::parse(r.out);
  // k = n: every observation must be selected, so Gamma = 0.
  CHECK(j["gamma"].get<double>() == doctest::Approx(0.0));
}

TEST_CASE("select-stream with Gamma = 0 labels the first k rows") {
  std::ostringstream input;
  Rng rng(201);
  for (int i = 0; i < 30; ++i) {
    input << rng.normal() << ' ' << rng.normal() << '\n';
  }
  const auto r = run({"select-stream", "--n", "30", "--k", "10", "--method",
                      "zero"},
                     input.str());
  REQUIRE(r.code == 0);
  std::istringstream lines(r.out);
  std::string line;
  int count = 0, selects = 0;
  while (std::getline(lines, line)) {
    ++count;
    if (line.rfind("SELECT", 0) == 0) {
      ++selects;
      CHECK(count <= 10);  // greedy: the first ten rows exhaust the budget
    }
  }
  CHECK(count == 30);
  CHECK(selects == 10);

  const auto again = run({"select-stream", "--n", "30", "--k", "10",
                          "--method", "zero"},
                         input.str());
  CHECK(again.out == r.out);  // byte-identical rerun
}

TEST_CASE("select-stream whitens against --sigma-file") {
  TempFile sigma("oal_cli_sigma.txt", "4 0\n0 1\n");
  // x = (2, 3) whitens to (1, 3): weighted norm sqrt(10).
  const auto r = run({"select-stream", "--n", "1", "--k", "1", "--sigma-file",
                      sigma.path.string()},
                     "2 3\n");
  REQUIRE(r.code == 0);
  std::istringstream fields(r.out);
  std::string verdict;
  double norm = 0, gamma = 0;
  fields >> verdict >> norm >> gamma;
  CHECK(verdict == "SELECT");  // forced: budget equals remaining stream
  CHECK(norm == doctest::Approx(std::sqrt(10.0)).epsilon(1e-5));
}

TEST_CASE("select-stream keeps reporting norms after the budget is spent") {
  const auto r = run({"select-stream", "--n", "3", "--k", "1", "--gamma",
                      "0"},
                     "1 0\n0 1\n3 4\n");
  REQUIRE(r.code == 0);
  std::istringstream lines(r.out);
  std::string line;
  std::vector<std::string> rows;
  while (std::getline(lines, line)) rows.push_back(line);
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].rfind("SELECT", 0) == 0);
  CHECK(rows[1].rfind("SKIP", 0) == 0);
  // The last row still carries its true weighted norm (5 for (3,4)).
  std::istringstream last(rows[2]);
  std::string verdict;
  double norm = 0;
  last >> verdict >> norm;
  CHECK(verdict == "SKIP");
  CHECK(norm == doctest::Approx(5.0).epsilon(1e-9));
}

TEST_CASE("select-stream rejects malformed rows") {
  const auto bad = run({"select-stream", "--n", "2", "--k", "1"},
                       "1 2\n1 oops\n");
  CHECK(bad.code == 1);
  CHECK(bad.err.find("not a number") != std::string::npos);
  const auto ragged = run({"select-stream", "--n", "2", "--k", "1"},
                          "1 2\n1 2 3\n");
  CHECK(ragged.code == 1);
}

TEST_CASE("bounds subcommand emits value, parameters, and caveats") {
  const auto r = run({"bounds", "--kind", "upper-main", "--d", "10", "--k",
                      "100", "--alpha", "0.1", "--phi", "1.6"});
  REQUIRE(r.code == 0);
  const json j = json::parse(r.out);
  CHECK(j["kind"] == "upper-main");
  CHECK(std::abs(j["value"].get<double>() - 10.0 / (0.81 * 1.6 * 100.0)) <
        1e-12);
  CHECK(!j["caveats"].empty());

  const auto ridge = run({"bounds", "--kind", "ridge-f", "--lambda-min", "0",
                          "--R", "10", "--sigma", "1", "--d", "5",
                          "--beta-norm-sq", "7"});
  REQUIRE(ridge.code == 0);
  const json rj = json::parse(ridge.out);
  CHECK(std::abs(rj["value"].get<double>() - (0.5 + 7.0)) < 1e-12);

  CHECK(run({"bounds", "--kind", "nonsense"}).code == 1);
  // Invalid parameters surface as runtime errors, not usage errors.
  CHECK(run({"bounds", "--kind", "upper-main", "--d", "10", "--k", "100",
             "--alpha", "2.0"})
            .code == 2);
}

TEST_CASE("dataset-check prints machine-readable diagnostics") {
  std::ostringstream csv;
  csv << "u,v,y\n";
  Rng rng(202);
  for (int i = 0; i < 60; ++i) {
    const double u = rng.normal(), v = rng.normal();
    csv << u << ',' << v << ',' << (u - v) << '\n';
  }
  TempFile file("oal_cli_dataset.csv", csv.str());
  const auto r = run({"dataset-check", "--csv", file.path.string(),
                      "--response", "y"});
  REQUIRE(r.code == 0);
  const json j = json::parse(r.out);
  CHECK(j["dim"] == 2);
  CHECK(j["train_rows"] == 48);
  CHECK(j["test_rows"] == 12);
  CHECK(j["usable"] == true);
  CHECK(j["covariance_condition_number"].get<double>() >= 1.0);
  CHECK(j["trace_inverse"].get<double>() >=
        j["trace_diag_inverse"].get<double>() - 1e-9);
}

TEST_CASE("dataset-check fails with exit 2 on unusable covariance") {
  std::ostringstream csv;
  csv << "u,v,y\n";
  Rng rng(203);
  for (int i = 0; i < 40; ++i) {
    const double u = rng.normal();
    csv << u << ',' << 2.0 * u << ',' << u << '\n';  // collinear covariates
  }
  TempFile file("oal_cli_collinear.csv", csv.str());
  const auto r = run({"dataset-check", "--csv", file.path.string(),
                      "--response", "y"});
  CHECK(r.code == 2);
  // Diagnostics are still printed before the failure is signalled.
  CHECK(r.out.find("\"usable\": false") != std::string::npos);
}

TEST_CASE("experiment subcommand writes records and summary files") {
  TempFile config("oal_cli_config.json", R"({
    "scenario": "synthetic-linear",
    "dim": 4,
    "variants": ["random", "fixed"],
    "schedule": [{"n": 150, "k": 20}],
    "replications": 5,
    "seed": 7,
    "workers": 2
  })");
  const auto records_path =
      (std::filesystem::temp_directory_path() / "oal_cli_records.csv").string();
  const auto r = run({"experiment", "--config", config.path.string(),
                      "--records-out", records_path});
  REQUIRE(r.code == 0);
  const json summary = json::parse(r.out);
  CHECK(summary["cells"].size() == 2);
  std::ifstream records(records_path);
  std::string header;
  std::getline(records, header);
  CHECK(header ==
        "point,n,k,psi,variant,replication,metric,selected,failed,error");
  int data_rows = 0;
  for (std::string line; std::getline(records, line);) ++data_rows;
  CHECK(data_rows == 10);
  std::filesystem::remove(records_path);
}

TEST_CASE("exit code contract") {
  CHECK(run({"--help"}).code == 0);
  CHECK(run({"threshold", "--help"}).code == 0);
  CHECK(run({}).code == 1);                      // missing subcommand
  CHECK(run({"threshold"}).code == 1);           // missing required flags
  CHECK(run({"threshold", "--d", "5", "--n", "100", "--k", "10",
             "--bogus-flag"})
            .code == 1);
  CHECK(run({"no-such-command"}).code == 1);
  // Runtime/numeric failure: empirical method without a sample.
  CHECK(run({"threshold", "--d", "5", "--n", "100", "--k", "10", "--method",
             "empirical"})
            .code == 1);  // missing input counts as usage
  // Genuine runtime error: config referencing a missing file.
  TempFile config("oal_cli_badcsv.json", R"({
    "scenario": "csv-dataset",
    "variants": ["random"],
    "schedule": [{"n": 0}],
    "replications": 2,
    "csv": {"path": "/nonexistent/file.csv", "response_column": "y"}
  })");
  const auto missing = run({"experiment", "--config", config.path.string()});
  CHECK(missing.code == 1);  // unreadable input is a usage-class ParseError
  CHECK(!missing.err.empty());
}
