#pragma once

#include "npp/causal.hpp"
#include "npp/gbf.hpp"
#include "npp/polya_tree.hpp"

#include <json.hpp>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace npp {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class Scenario { kWellSpecified, kMisspecified };
std::string scenario_name(Scenario s);

/// Synthetic-study configuration shared by the bf-curves, kl-curves and
/// median-exp commands. Replicate r runs on rng stream r, so results are
/// bit-identical under any --threads value.
struct ExperimentConfig {
  std::vector<Scenario> scenarios = {Scenario::kWellSpecified, Scenario::kMisspecified};
  double skew_alpha = 10.0;
  std::vector<std::size_t> n_grid = {5, 50, 500};
  std::size_t replicates = 100;

  double eta_prior = 0.1;
  double rate_mmd = 0.49;
  double rate_ksd = 0.49;
  double rate_wasserstein = 0.1;
  std::size_t gbf_draws = 200;        // prior and posterior parameter draws
  std::size_t posterior_draws = 2000; // functional draws per component
  std::size_t kl_holdout = 1000;
  DivergenceKind median_divergence = DivergenceKind::kMmdU;  // gBF for median-exp

  PolyaTreeConfig pt;

  std::uint64_t seed = 0;
  unsigned threads = 0;  // 0: hardware concurrency

  void validate() const;
};

struct ResultRow {
  std::string scenario;
  std::size_t n = 0;
  std::size_t replicate = 0;
  std::string metric;
  double value = 0.0;
};

/// Exact Polya-tree log Bayes factor plus the generalized Bayes factor for
/// all three divergences, per (scenario, n, replicate).
std::vector<ResultRow> run_bf_curves(const ExperimentConfig& cfg);

/// Held-out KL to the truth of the parametric, Polya-tree, and mixture
/// predictives.
std::vector<ResultRow> run_kl_curves(const ExperimentConfig& cfg);

/// Median point error and credible-interval coverage for the parametric,
/// Bayesian-bootstrap and generalized-mixture posteriors.
std::vector<ResultRow> run_median_experiment(const ExperimentConfig& cfg);

/// RFC-4180 CSV with header scenario,n,replicate,metric,value; rows sorted
/// by (scenario, n, replicate, metric).
void write_result_csv(const std::vector<ResultRow>& rows, const std::string& path);
std::string result_csv_string(const std::vector<ResultRow>& rows);

/// Median of each metric per (scenario, n), keyed "scenario/n=N/metric".
nlohmann::json summarize_medians(const std::vector<ResultRow>& rows);

struct AteOptions {
  std::string treatment;
  std::string outcome;
  std::vector<std::string> confounders;

  GbfConfig gbf;
  FlexibleAteConfig flex;
  std::size_t n_draws = 2000;
  std::vector<std::size_t> subsample_grid;  // optional additional subsampled runs
  std::size_t subsample_replicates = 10;
  std::uint64_t seed = 0;
  unsigned threads = 0;
};

/// Strict RFC-4180 reader; throws DataError on malformed rows, unknown
/// columns, missing values or non-numeric fields.
CausalDataset load_causal_csv(const std::string& path, const AteOptions& opts);

nlohmann::json run_ate(const CausalDataset& data, const AteOptions& opts);

}  // namespace npp
