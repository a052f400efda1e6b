#include "npp/harness.hpp"

#include "npp/functionals.hpp"
#include "npp/math.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace npp {

namespace {

constexpr std::uint64_t kDataKey = 0;
constexpr std::uint64_t kGbfMmdKey = 1;
constexpr std::uint64_t kGbfWassKey = 2;
constexpr std::uint64_t kGbfKsdKey = 3;
constexpr std::uint64_t kPmDrawsKey = 4;
constexpr std::uint64_t kBbDrawsKey = 5;
constexpr std::uint64_t kHoldoutKey = 6;

Truth make_truth(Scenario s, double alpha) {
  return s == Scenario::kWellSpecified ? Truth::standard_normal() : Truth::skew_normal(alpha);
}

GbfConfig make_gbf_config(const ExperimentConfig& cfg, DivergenceKind kind) {
  GbfConfig g;
  g.divergence = kind;
  g.eta_prior = cfg.eta_prior;
  g.n_prior_draws = cfg.gbf_draws;
  g.n_posterior_draws = cfg.gbf_draws;
  switch (kind) {
    case DivergenceKind::kWassersteinPP:
      g.rate = cfg.rate_wasserstein;
      break;
    case DivergenceKind::kKsdU:
      g.rate = cfg.rate_ksd;
      break;
    default:
      g.rate = cfg.rate_mmd;
      break;
  }
  return g;
}

struct TaskGrid {
  const ExperimentConfig& cfg;
  std::size_t tasks() const { return cfg.scenarios.size() * cfg.n_grid.size() * cfg.replicates; }
  // task -> (scenario index, n index, replicate)
  void split(std::size_t t, std::size_t& si, std::size_t& ni, std::size_t& rep) const {
    rep = t % cfg.replicates;
    const std::size_t rest = t / cfg.replicates;
    ni = rest % cfg.n_grid.size();
    si = rest / cfg.n_grid.size();
  }
  // Stream layout: stream id = replicate, substream keyed by (scenario, n).
  RngStream task_rng(std::size_t si, std::size_t ni, std::size_t rep) const {
    return RngStream(cfg.seed, rep).substream(1000 + si * 100 + ni);
  }
};

void sort_rows(std::vector<ResultRow>& rows) {
  std::sort(rows.begin(), rows.end(), [](const ResultRow& a, const ResultRow& b) {
    if (a.scenario != b.scenario) return a.scenario < b.scenario;
    if (a.n != b.n) return a.n < b.n;
    if (a.replicate != b.replicate) return a.replicate < b.replicate;
    return a.metric < b.metric;
  });
}

double safe_log(double x) {
  if (x <= 0.0) return -std::numeric_limits<double>::infinity();
  return std::log(x);
}

}  // namespace

std::string scenario_name(Scenario s) {
  return s == Scenario::kWellSpecified ? "well_specified" : "misspecified";
}

void ExperimentConfig::validate() const {
  if (scenarios.empty()) throw ConfigError("config: at least one scenario required");
  if (n_grid.empty()) throw ConfigError("config: n_grid must be nonempty");
  if (!std::is_sorted(n_grid.begin(), n_grid.end()) ||
      std::adjacent_find(n_grid.begin(), n_grid.end()) != n_grid.end()) {
    throw ConfigError("config: n_grid must be strictly ascending");
  }
  if (n_grid.front() < 1) throw ConfigError("config: n must be >= 1");
  if (replicates < 1) throw ConfigError("config: replicates must be >= 1");
  if (!(eta_prior > 0.0 && eta_prior < 1.0)) throw ConfigError("config: eta must lie in (0, 1)");
  if (gbf_draws < 1 || posterior_draws < 1 || kl_holdout < 1) {
    throw ConfigError("config: draw counts must be >= 1");
  }
  pt.validate();
}

std::vector<ResultRow> run_bf_curves(const ExperimentConfig& cfg) {
  cfg.validate();
  const TaskGrid grid{cfg};
  const ConjugateGaussianModel model;
  std::vector<std::vector<ResultRow>> slots(grid.tasks());
  parallel_for(grid.tasks(), cfg.threads == 0 ? 64 : cfg.threads, [&](std::size_t t) {
    std::size_t si, ni, rep;
    grid.split(t, si, ni, rep);
    const Scenario scen = cfg.scenarios[si];
    const std::size_t n = cfg.n_grid[ni];
    const Truth truth = make_truth(scen, cfg.skew_alpha);
    RngStream rng = grid.task_rng(si, ni, rep);
    RngStream data_rng = rng.substream(kDataKey);
    const Dataset data = truth.sample(n, data_rng);

    auto& rows = slots[t];
    auto push = [&](const std::string& metric, double value) {
      rows.push_back({scenario_name(scen), n, rep, metric, value});
    };

    const double log_bf = pt_log_bayes_factor(data, model, cfg.eta_prior, cfg.pt);
    push("log_bf_exact", log_bf);
    push("eta_exact", pt_exact_mixing_weight(data, model, cfg.eta_prior, cfg.pt));

    const MixtureWeight mmd = generalized_bayes_factor(
        model, data, make_gbf_config(cfg, DivergenceKind::kMmdU), rng.substream(kGbfMmdKey));
    push("log_gbf_mmd", safe_log(mmd.gbf));
    push("eta_hat_mmd", mmd.eta_hat);

    const MixtureWeight wass = generalized_bayes_factor(
        model, data, make_gbf_config(cfg, DivergenceKind::kWassersteinPP),
        rng.substream(kGbfWassKey));
    push("log_gbf_wass", safe_log(wass.gbf));
    push("eta_hat_wass", wass.eta_hat);

    const MixtureWeight ksd = generalized_bayes_factor(
        model, data, make_gbf_config(cfg, DivergenceKind::kKsdU), rng.substream(kGbfKsdKey));
    push("log_gbf_ksd", safe_log(ksd.gbf));
    push("eta_hat_ksd", ksd.eta_hat);
  });
  std::vector<ResultRow> rows;
  for (auto& s : slots) rows.insert(rows.end(), s.begin(), s.end());
  sort_rows(rows);
  return rows;
}

std::vector<ResultRow> run_kl_curves(const ExperimentConfig& cfg) {
  cfg.validate();
  const TaskGrid grid{cfg};
  const ConjugateGaussianModel model;
  std::vector<std::vector<ResultRow>> slots(grid.tasks());
  parallel_for(grid.tasks(), cfg.threads == 0 ? 64 : cfg.threads, [&](std::size_t t) {
    std::size_t si, ni, rep;
    grid.split(t, si, ni, rep);
    const Scenario scen = cfg.scenarios[si];
    const std::size_t n = cfg.n_grid[ni];
    const Truth truth = make_truth(scen, cfg.skew_alpha);
    RngStream rng = grid.task_rng(si, ni, rep);
    RngStream data_rng = rng.substream(kDataKey);
    const Dataset data = truth.sample(n, data_rng);

    const GaussianPosterior post = model.posterior(data);
    const PolyaTreePredictive pt_pred(data, model, cfg.pt);
    const double eta_n = pt_exact_mixing_weight(data, model, cfg.eta_prior, cfg.pt);

    auto pm_logpdf = [&](double x) { return gaussian_predictive_logpdf(post, x, model.obs_var()); };
    auto pt_logpdf = [&](double x) { return pt_pred.logpdf(x); };
    auto npp_logpdf = [&](double x) {
      LogSumAccumulator acc;
      if (eta_n > 0.0) acc.add(std::log(eta_n) + pm_logpdf(x));
      if (eta_n < 1.0) acc.add(std::log1p(-eta_n) + pt_logpdf(x));
      return acc.value();
    };

    // One held-out sample shared by all three predictives.
    RngStream h1 = rng.substream(kHoldoutKey);
    RngStream h2 = rng.substream(kHoldoutKey);
    RngStream h3 = rng.substream(kHoldoutKey);
    const double kl_pm = kl_to_truth(truth, pm_logpdf, cfg.kl_holdout, h1);
    const double kl_pt = kl_to_truth(truth, pt_logpdf, cfg.kl_holdout, h2);
    const double kl_npp = kl_to_truth(truth, npp_logpdf, cfg.kl_holdout, h3);

    auto& rows = slots[t];
    rows.push_back({scenario_name(scen), n, rep, "kl_parametric", kl_pm});
    rows.push_back({scenario_name(scen), n, rep, "kl_pt", kl_pt});
    rows.push_back({scenario_name(scen), n, rep, "kl_npp", kl_npp});
    rows.push_back({scenario_name(scen), n, rep, "eta_exact", eta_n});
  });
  std::vector<ResultRow> rows;
  for (auto& s : slots) rows.insert(rows.end(), s.begin(), s.end());
  sort_rows(rows);
  return rows;
}

std::vector<ResultRow> run_median_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const TaskGrid grid{cfg};
  const ConjugateGaussianModel model;
  std::vector<std::vector<ResultRow>> slots(grid.tasks());
  parallel_for(grid.tasks(), cfg.threads == 0 ? 64 : cfg.threads, [&](std::size_t t) {
    std::size_t si, ni, rep;
    grid.split(t, si, ni, rep);
    const Scenario scen = cfg.scenarios[si];
    const std::size_t n = cfg.n_grid[ni];
    const Truth truth = make_truth(scen, cfg.skew_alpha);
    const double true_median = truth.median();
    RngStream rng = grid.task_rng(si, ni, rep);
    RngStream data_rng = rng.substream(kDataKey);
    const Dataset data = truth.sample(n, data_rng);

    const MixtureWeight weight =
        generalized_bayes_factor(model, data, make_gbf_config(cfg, cfg.median_divergence),
                                 rng.substream(kGbfMmdKey));
    RngStream pm_rng = rng.substream(kPmDrawsKey);
    RngStream bb_rng = rng.substream(kBbDrawsKey);
    const Functional median = Functional::median();
    const FunctionalPosterior pm =
        parametric_functional_posterior(model, data, median, cfg.posterior_draws, pm_rng);
    const FunctionalPosterior bb =
        bayesian_bootstrap_posterior(data, median, cfg.posterior_draws, bb_rng);
    const FunctionalPosterior mixed = mix_posteriors(pm, bb, weight.eta_hat);

    auto& rows = slots[t];
    auto push = [&](const std::string& metric, double value) {
      rows.push_back({scenario_name(scen), n, rep, metric, value});
    };
    auto covered = [&](const FunctionalPosterior& p, double lo_q, double hi_q) {
      const double lo = weighted_quantile(p, lo_q);
      const double hi = weighted_quantile(p, hi_q);
      return (lo <= true_median && true_median <= hi) ? 1.0 : 0.0;
    };
    push("eta_hat", weight.eta_hat);
    push("median_abs_err_pm", std::abs(pm.mean() - true_median));
    push("median_abs_err_np", std::abs(bb.mean() - true_median));
    push("median_abs_err_gnpp", std::abs(mixed.mean() - true_median));
    push("covered_90_pm", covered(pm, 0.05, 0.95));
    push("covered_90_np", covered(bb, 0.05, 0.95));
    push("covered_90_gnpp", covered(mixed, 0.05, 0.95));
    push("covered_95_pm", covered(pm, 0.025, 0.975));
    push("covered_95_np", covered(bb, 0.025, 0.975));
    push("covered_95_gnpp", covered(mixed, 0.025, 0.975));
  });
  std::vector<ResultRow> rows;
  for (auto& s : slots) rows.insert(rows.end(), s.begin(), s.end());
  sort_rows(rows);
  return rows;
}

std::string result_csv_string(const std::vector<ResultRow>& rows) {
  std::string out = "scenario,n,replicate,metric,value\r\n";
  char buf[64];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%.17g", r.value);
    out += r.scenario;
    out += ',';
    out += std::to_string(r.n);
    out += ',';
    out += std::to_string(r.replicate);
    out += ',';
    out += r.metric;
    out += ',';
    out += buf;
    out += "\r\n";
  }
  return out;
}

void write_result_csv(const std::vector<ResultRow>& rows, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open output file: " + path);
  f << result_csv_string(rows);
  if (!f) throw DataError("failed writing output file: " + path);
}

nlohmann::json summarize_medians(const std::vector<ResultRow>& rows) {
  std::map<std::string, std::vector<double>> buckets;
  for (const auto& r : rows) {
    buckets[r.scenario + "/n=" + std::to_string(r.n) + "/" + r.metric].push_back(r.value);
  }
  nlohmann::json out = nlohmann::json::object();
  for (auto& [key, values] : buckets) {
    std::sort(values.begin(), values.end());
    const std::size_t m = values.size();
    const double med =
        (m % 2 == 1) ? values[m / 2] : 0.5 * (values[m / 2 - 1] + values[m / 2]);
    out[key] = med;
  }
  return out;
}

// ---------------------------------------------------------------------------
// CSV input and the ate command.

namespace {

std::vector<std::vector<std::string>> parse_csv(std::istream& in) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool in_quotes = false;
  bool field_started = false;
  char c;
  auto end_field = [&] {
    row.push_back(field);
    field.clear();
    field_started = false;
  };
  auto end_row = [&](std::size_t line) {
    end_field();
    if (row.size() == 1 && row[0].empty()) {
      row.clear();  // blank line
      return;
    }
    rows.push_back(row);
    row.clear();
    (void)line;
  };
  std::size_t line = 1;
  while (in.get(c)) {
    if (in_quotes) {
      if (c == '"') {
        if (in.peek() == '"') {
          in.get(c);
          field += '"';
        } else {
          in_quotes = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    switch (c) {
      case '"':
        if (field_started && !field.empty()) {
          throw DataError("line " + std::to_string(line) + ": stray quote inside field");
        }
        in_quotes = true;
        field_started = true;
        break;
      case ',':
        end_field();
        break;
      case '\r':
        break;
      case '\n':
        end_row(line);
        ++line;
        break;
      default:
        field += c;
        field_started = true;
    }
  }
  if (in_quotes) throw DataError("unterminated quoted field");
  if (field_started || !field.empty() || !row.empty()) end_row(line);
  return rows;
}

double parse_double_field(const std::string& s, std::size_t row, const std::string& col) {
  if (s.empty()) {
    throw DataError("row " + std::to_string(row) + ": missing value in column '" + col + "'");
  }
  double value;
  const char* begin = s.data();
  const char* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end) {
    throw DataError("row " + std::to_string(row) + ": non-numeric value '" + s + "' in column '" +
                    col + "'");
  }
  return value;
}

}  // namespace

CausalDataset load_causal_csv(const std::string& path, const AteOptions& opts) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open csv file: " + path);
  const auto rows = parse_csv(f);
  if (rows.empty()) throw DataError("csv file is empty: " + path);
  const auto& header = rows.front();

  auto column_index = [&](const std::string& name) -> std::size_t {
    for (std::size_t j = 0; j < header.size(); ++j) {
      if (header[j] == name) return j;
    }
    throw DataError("column '" + name + "' not found in csv header");
  };
  if (opts.treatment.empty() || opts.outcome.empty()) {
    throw ConfigError("ate: --treatment and --outcome are required");
  }
  const std::size_t a_col = column_index(opts.treatment);
  const std::size_t y_col = column_index(opts.outcome);
  std::vector<std::size_t> w_cols;
  for (const auto& name : opts.confounders) w_cols.push_back(column_index(name));

  const std::size_t n = rows.size() - 1;
  if (n == 0) throw DataError("csv file has no data rows: " + path);
  CausalDataset data;
  data.a.resize(static_cast<Eigen::Index>(n));
  data.y.resize(static_cast<Eigen::Index>(n));
  data.w.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(w_cols.size()));
  for (std::size_t i = 0; i < n; ++i) {
    const auto& row = rows[i + 1];
    if (row.size() != header.size()) {
      throw DataError("row " + std::to_string(i + 2) + ": expected " +
                      std::to_string(header.size()) + " fields, got " + std::to_string(row.size()));
    }
    data.a(static_cast<Eigen::Index>(i)) = parse_double_field(row[a_col], i + 2, opts.treatment);
    data.y(static_cast<Eigen::Index>(i)) = parse_double_field(row[y_col], i + 2, opts.outcome);
    for (std::size_t j = 0; j < w_cols.size(); ++j) {
      data.w(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          parse_double_field(row[w_cols[j]], i + 2, opts.confounders[j]);
    }
  }
  return data;
}

namespace {

nlohmann::json posterior_quantiles(const FunctionalPosterior& post) {
  return nlohmann::json{{"q05", weighted_quantile(post, 0.05)},
                        {"q25", weighted_quantile(post, 0.25)},
                        {"q50", weighted_quantile(post, 0.5)},
                        {"q75", weighted_quantile(post, 0.75)},
                        {"q95", weighted_quantile(post, 0.95)}};
}

nlohmann::json ate_single_run(const CausalDataset& data, const AteOptions& opts,
                              const RngStream& rng) {
  const GnppAteResult res = gnpp_ate(data, opts.gbf, opts.flex, opts.n_draws, rng);
  nlohmann::json out;
  out["n"] = data.size();
  out["eta_hat"] = res.weight.eta_hat;
  out["gbf"] = res.weight.gbf;
  out["contrast"] = {{"hi", res.contrast.hi},
                     {"lo", res.contrast.lo},
                     {"degenerate", res.contrast.degenerate}};
  out["p_positive"] = {{"parametric", res.p_positive_parametric},
                       {"flexible", res.p_positive_nonparametric},
                       {"gnpp", res.p_positive}};
  out["quantiles"] = {{"parametric", posterior_quantiles(res.parametric)},
                      {"flexible", posterior_quantiles(res.nonparametric)},
                      {"gnpp", posterior_quantiles(res.posterior)}};
  return out;
}

CausalDataset subsample(const CausalDataset& data, std::size_t m, RngStream& rng) {
  // Without replacement (Fisher-Yates prefix).
  const std::size_t n = data.size();
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.uniform_index(n - i));
    std::swap(idx[i], idx[j]);
  }
  CausalDataset out;
  out.a.resize(static_cast<Eigen::Index>(m));
  out.y.resize(static_cast<Eigen::Index>(m));
  out.w.resize(static_cast<Eigen::Index>(m), data.w.cols());
  for (std::size_t i = 0; i < m; ++i) {
    out.a(static_cast<Eigen::Index>(i)) = data.a(static_cast<Eigen::Index>(idx[i]));
    out.y(static_cast<Eigen::Index>(i)) = data.y(static_cast<Eigen::Index>(idx[i]));
    out.w.row(static_cast<Eigen::Index>(i)) = data.w.row(static_cast<Eigen::Index>(idx[i]));
  }
  return out;
}

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size();
  return (m % 2 == 1) ? v[m / 2] : 0.5 * (v[m / 2 - 1] + v[m / 2]);
}

}  // namespace

nlohmann::json run_ate(const CausalDataset& data, const AteOptions& opts) {
  data.validate();
  nlohmann::json out = ate_single_run(data, opts, RngStream(opts.seed, 0));

  if (!opts.subsample_grid.empty()) {
    nlohmann::json grid = nlohmann::json::array();
    for (std::size_t gi = 0; gi < opts.subsample_grid.size(); ++gi) {
      const std::size_t m = opts.subsample_grid[gi];
      if (m < 3 || m > data.size()) {
        throw ConfigError("ate: subsample size " + std::to_string(m) + " out of range");
      }
      const std::size_t reps = opts.subsample_replicates;
      std::vector<nlohmann::json> results(reps);
      parallel_for(reps, opts.threads == 0 ? 64 : opts.threads, [&](std::size_t r) {
        RngStream rng = RngStream(opts.seed, r + 1).substream(7000 + gi);
        RngStream pick = rng.substream(0);
        const CausalDataset sub = subsample(data, m, pick);
        results[r] = ate_single_run(sub, opts, rng.substream(1));
      });
      std::vector<double> eta, p_pm, p_np, p_mix;
      for (const auto& r : results) {
        eta.push_back(r["eta_hat"].get<double>());
        p_pm.push_back(r["p_positive"]["parametric"].get<double>());
        p_np.push_back(r["p_positive"]["flexible"].get<double>());
        p_mix.push_back(r["p_positive"]["gnpp"].get<double>());
      }
      grid.push_back({{"n", m},
                      {"replicates", reps},
                      {"eta_hat_median", median_of(eta)},
                      {"p_positive_median",
                       {{"parametric", median_of(p_pm)},
                        {"flexible", median_of(p_np)},
                        {"gnpp", median_of(p_mix)}}}});
    }
    out["subsamples"] = grid;
  }
  return out;
}

}  // namespace npp
