#include "npp/harness.hpp"

#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include "test_util.hpp"

using namespace npp;

namespace {

ExperimentConfig tiny_config() {
  ExperimentConfig cfg;
  cfg.n_grid = {5, 10};
  cfg.replicates = 3;
  cfg.gbf_draws = 10;
  cfg.posterior_draws = 60;
  cfg.kl_holdout = 50;
  cfg.pt.h_nodes = 16;
  cfg.pt.theta_nodes = 24;
  cfg.seed = 5;
  cfg.threads = 2;
  return cfg;
}

std::string temp_path(const std::string& name) {
  return std::string("/tmp/npp_test_") + std::to_string(::getpid()) + "_" + name;
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  f << content;
}

// Simulated linear dataset in CSV form.
std::string linear_csv(std::size_t n, bool nonlinear, std::uint64_t seed) {
  RngStream rng(seed, 0);
  std::ostringstream out;
  out << "gene_a,gene_y,tf1,tf2\n";
  for (std::size_t i = 0; i < n; ++i) {
    const double w1 = rng.normal();
    const double w2 = rng.normal();
    const double a = 0.5 * w1 + rng.normal();
    double mean = 0.3 + 0.5 * a + 0.6 * w1 - 0.2 * w2;
    if (nonlinear) mean += w1 * w1;
    const double y = mean + 0.5 * rng.normal();
    out << a << ',' << y << ',' << w1 << ',' << w2 << "\n";
  }
  return out.str();
}

}  // namespace

TEST_SUITE_BEGIN("harness");

TEST_CASE("config validation") {
  ExperimentConfig cfg = tiny_config();
  cfg.n_grid = {};
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = tiny_config();
  cfg.n_grid = {10, 5};
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = tiny_config();
  cfg.replicates = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = tiny_config();
  cfg.eta_prior = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("runners emit the documented schema, sorted and reproducible") {
  const ExperimentConfig cfg = tiny_config();
  const auto rows = run_bf_curves(cfg);
  // 2 scenarios x 2 n x 3 replicates x 8 metrics
  CHECK(rows.size() == 2 * 2 * 3 * 8);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& a = rows[i - 1];
    const auto& b = rows[i];
    const auto ka = std::make_tuple(a.scenario, a.n, a.replicate, a.metric);
    const auto kb = std::make_tuple(b.scenario, b.n, b.replicate, b.metric);
    CHECK(ka < kb);
  }

  const std::string csv = result_csv_string(rows);
  CHECK(csv.rfind("scenario,n,replicate,metric,value\r\n", 0) == 0);

  // Bit-for-bit reproducibility under a different thread cap.
  ExperimentConfig cfg2 = cfg;
  cfg2.threads = 1;
  CHECK(result_csv_string(run_bf_curves(cfg2)) == csv);

  for (const auto& r : rows) {
    if (r.metric.rfind("eta", 0) == 0) {
      CHECK(r.value >= 0.0);
      CHECK(r.value <= 1.0);
    }
  }
}

TEST_CASE("kl and median runners cover their metrics") {
  ExperimentConfig cfg = tiny_config();
  cfg.scenarios = {Scenario::kMisspecified};
  cfg.n_grid = {8};

  const auto kl_rows = run_kl_curves(cfg);
  CHECK(kl_rows.size() == 3 * 4);
  bool saw_npp = false;
  for (const auto& r : kl_rows) {
    if (r.metric == "kl_npp") saw_npp = true;
    CHECK(r.scenario == "misspecified");
  }
  CHECK(saw_npp);

  const auto med_rows = run_median_experiment(cfg);
  CHECK(med_rows.size() == 3 * 10);
  const auto medians = summarize_medians(med_rows);
  CHECK(medians.contains("misspecified/n=8/median_abs_err_gnpp"));
  for (const auto& r : med_rows) {
    if (r.metric.rfind("covered", 0) == 0) {
      CHECK((r.value == 0.0 || r.value == 1.0));
    }
  }
}

TEST_CASE("summarize_medians computes per-bucket medians") {
  std::vector<ResultRow> rows;
  for (std::size_t rep = 0; rep < 5; ++rep) {
    rows.push_back({"well_specified", 5, rep, "m", static_cast<double>(rep)});
  }
  const auto j = summarize_medians(rows);
  CHECK(j["well_specified/n=5/m"].get<double>() == 2.0);
}

TEST_CASE("csv loader accepts quoted headers and rejects malformed rows") {
  AteOptions opts;
  opts.treatment = "a";
  opts.outcome = "y";
  opts.confounders = {"w 1"};

  const std::string ok = temp_path("ok.csv");
  write_file(ok, "a,\"y\",\"w 1\"\r\n1.5,2.25,-0.5\r\n\"2.5\",0,1e-3\r\n");
  const CausalDataset data = load_causal_csv(ok, opts);
  CHECK(data.size() == 2);
  CHECK(data.a(0) == 1.5);
  CHECK(data.y(1) == 0.0);
  CHECK(data.w(1, 0) == 1e-3);

  const std::string missing = temp_path("missing.csv");
  write_file(missing, "a,y,w 1\n1,2,\n");
  CHECK_THROWS_WITH_AS(static_cast<void>(load_causal_csv(missing, opts)),
                       "row 2: missing value in column 'w 1'", DataError);

  const std::string short_row = temp_path("short.csv");
  write_file(short_row, "a,y,w 1\n1,2\n");
  CHECK_THROWS_AS(static_cast<void>(load_causal_csv(short_row, opts)), DataError);

  const std::string bad_value = temp_path("bad.csv");
  write_file(bad_value, "a,y,w 1\n1,zebra,3\n");
  CHECK_THROWS_AS(static_cast<void>(load_causal_csv(bad_value, opts)), DataError);

  AteOptions unknown = opts;
  unknown.confounders = {"nope"};
  CHECK_THROWS_AS(static_cast<void>(load_causal_csv(ok, unknown)), DataError);

  CHECK_THROWS_AS(static_cast<void>(load_causal_csv(temp_path("absent.csv"), opts)), DataError);
  std::remove(ok.c_str());
  std::remove(missing.c_str());
  std::remove(short_row.c_str());
  std::remove(bad_value.c_str());
}

TEST_CASE("run_ate produces the documented JSON and tracks the truth") {
  AteOptions opts;
  opts.treatment = "gene_a";
  opts.outcome = "gene_y";
  opts.confounders = {"tf1", "tf2"};
  opts.gbf.n_prior_draws = 30;
  opts.gbf.n_posterior_draws = 30;
  opts.flex.n_features = 40;
  opts.n_draws = 500;
  opts.seed = 3;
  opts.threads = 2;

  const std::string lin = temp_path("lin.csv");
  write_file(lin, linear_csv(400, false, 21));
  const auto data = load_causal_csv(lin, opts);
  const auto out = run_ate(data, opts);
  CHECK(out["n"].get<std::size_t>() == 400);
  CHECK(out["eta_hat"].get<double>() >= 0.0);
  CHECK(out["eta_hat"].get<double>() <= 1.0);
  const double p_pm = out["p_positive"]["parametric"].get<double>();
  const double p_mix = out["p_positive"]["gnpp"].get<double>();
  // Linear truth with tau = 0.5: everyone should be confident the ATE is
  // positive, and the mixture should track the parametric answer closely.
  CHECK(p_pm > 0.9);
  CHECK(std::abs(p_mix - p_pm) < 0.05);
  CHECK(out["quantiles"]["gnpp"].contains("q50"));

  // Nonlinear truth: the mixture leans toward the flexible branch.
  const std::string non = temp_path("non.csv");
  write_file(non, linear_csv(400, true, 22));
  const auto data2 = load_causal_csv(non, opts);
  const auto out2 = run_ate(data2, opts);
  const double p2_pm = out2["p_positive"]["parametric"].get<double>();
  const double p2_np = out2["p_positive"]["flexible"].get<double>();
  const double p2_mix = out2["p_positive"]["gnpp"].get<double>();
  CHECK(std::abs(p2_mix - p2_np) <= std::abs(p2_mix - p2_pm) + 1e-12);

  // Subsample grid summaries.
  AteOptions sub = opts;
  sub.subsample_grid = {100, 200};
  sub.subsample_replicates = 3;
  const auto out3 = run_ate(data, sub);
  REQUIRE(out3.contains("subsamples"));
  CHECK(out3["subsamples"].size() == 2);
  CHECK(out3["subsamples"][0]["n"].get<std::size_t>() == 100);
  CHECK(out3["subsamples"][0]["p_positive_median"].contains("gnpp"));

  std::remove(lin.c_str());
  std::remove(non.c_str());
}

TEST_SUITE_END();

// ---------------------------------------------------------------------------
// CLI integration, driven through the real binary (path in $NPP_CLI).

namespace {

struct CliResult {
  int exit_code = -1;
  std::string stdout_text;
};

CliResult run_cli(const std::string& args) {
  const char* cli = std::getenv("NPP_CLI");
  REQUIRE_MESSAGE(cli != nullptr, "NPP_CLI must point at the CLI binary");
  const std::string out_file = temp_path("cli_stdout.txt");
  const std::string cmd = std::string(cli) + " " + args + " > " + out_file + " 2>/dev/null";
  const int raw = std::system(cmd.c_str());
  CliResult res;
  res.exit_code = WEXITSTATUS(raw);
  std::ifstream f(out_file);
  std::stringstream ss;
  ss << f.rdbuf();
  res.stdout_text = ss.str();
  std::remove(out_file.c_str());
  return res;
}

}  // namespace

TEST_SUITE_BEGIN("cli");

TEST_CASE("bf-curves command writes csv and a one-line summary") {
  const std::string out = temp_path("bf.csv");
  const auto res = run_cli("bf-curves --replicates 2 --n-grid 5,10 --gbf-draws 10 "
                           "--pt-h-nodes 16 --seed 1 --threads 2 --out " + out);
  CHECK(res.exit_code == 0);
  const auto json = nlohmann::json::parse(res.stdout_text);
  CHECK(json["command"] == "bf-curves");
  CHECK(json["medians"].contains("misspecified/n=5/log_bf_exact"));
  std::ifstream f(out);
  std::string header;
  std::getline(f, header);
  CHECK(header.rfind("scenario,n,replicate,metric,value", 0) == 0);
  std::remove(out.c_str());
}

TEST_CASE("config file mirrors the flags") {
  const std::string out = temp_path("med.csv");
  const std::string cfg_path = temp_path("cfg.ini");
  write_file(cfg_path,
             "replicates=2\nn-grid=6,12\nscenario=well\ngbf-draws=8\nposterior-draws=50\n"
             "holdout=40\npt-h-nodes=16\nseed=9\n");
  const auto res = run_cli("median-exp --config " + cfg_path + " --out " + out);
  CHECK(res.exit_code == 0);
  const auto json = nlohmann::json::parse(res.stdout_text);
  CHECK(json["medians"].contains("well_specified/n=12/median_abs_err_gnpp"));
  CHECK_FALSE(json["medians"].contains("misspecified/n=12/median_abs_err_gnpp"));
  std::remove(out.c_str());
  std::remove(cfg_path.c_str());
}

TEST_CASE("exit codes: 2 for config errors, 3 for data errors") {
  CHECK(run_cli("bf-curves --replicates 0 --out /tmp/npp_x.csv --seed 1").exit_code == 2);
  CHECK(run_cli("no-such-command").exit_code == 2);
  CHECK(run_cli("bf-curves").exit_code == 2);  // missing required --out

  const std::string bad = temp_path("bad.csv");
  write_file(bad, "a,y\n1,zebra\n");
  const std::string out = temp_path("ate.json");
  CHECK(run_cli("ate " + bad + " --treatment a --outcome y --out " + out).exit_code == 3);
  CHECK(run_cli("ate /tmp/definitely_absent_file.csv --treatment a --outcome y --out " + out)
            .exit_code == 3);
  std::remove(bad.c_str());
}

TEST_CASE("ate command end to end") {
  const std::string csv = temp_path("ate_in.csv");
  write_file(csv, linear_csv(200, false, 31));
  const std::string out = temp_path("ate_out.json");
  const auto res = run_cli("ate " + csv +
                           " --treatment gene_a --outcome gene_y --confounders tf1,tf2 "
                           "--features 30 --gbf-draws 20 --n-draws 300 --seed 2 --out " + out);
  CHECK(res.exit_code == 0);
  const auto summary = nlohmann::json::parse(res.stdout_text);
  CHECK(summary["command"] == "ate");
  CHECK(summary["p_positive"].contains("gnpp"));
  std::ifstream f(out);
  REQUIRE(f.good());
  nlohmann::json full;
  f >> full;
  CHECK(full["quantiles"]["parametric"].contains("q95"));
  std::remove(csv.c_str());
  std::remove(out.c_str());
}

TEST_SUITE_END();
