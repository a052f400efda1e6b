#include "npp/gbf.hpp"

#include "npp/math.hpp"

#include <cmath>
#include <memory>
#include <stdexcept>

namespace npp {

namespace {

Dataset take_rows(const Dataset& data, std::size_t begin, std::size_t end) {
  RowMatrixXd m(static_cast<Eigen::Index>(end - begin), static_cast<Eigen::Index>(data.dim()));
  for (std::size_t i = begin; i < end; ++i) {
    for (std::size_t c = 0; c < data.dim(); ++c) {
      m(static_cast<Eigen::Index>(i - begin), static_cast<Eigen::Index>(c)) = data.row(i)[c];
    }
  }
  return Dataset(std::move(m));
}

Dataset draw_model_sample(const ParametricModel& model, const Eigen::VectorXd& theta, std::size_t m,
                          RngStream& rng) {
  const auto dim = static_cast<std::size_t>(model.data_dim());
  RowMatrixXd pts(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(dim));
  for (std::size_t i = 0; i < m; ++i) {
    const Eigen::VectorXd x = model.sample(theta, rng);
    for (std::size_t c = 0; c < dim; ++c) {
      pts(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = x(static_cast<Eigen::Index>(c));
    }
  }
  return Dataset(std::move(pts));
}

// Shared state so data-only kernel sums are computed once per call, not per
// parameter draw.
struct DivergenceWorkspace {
  const GbfConfig& cfg;
  Kernel kernel;
  Dataset eval_data;
  double data_kernel_term = 0.0;          // mean off-diagonal (U) or full (V) self sum
  std::unique_ptr<SteinKernelCache> stein; // KSD only
  std::size_t m = 0;                       // model samples per draw

  DivergenceWorkspace(const ParametricModel& model, const Dataset& data, const GbfConfig& c)
      : cfg(c), eval_data(data) {
    cfg.validate();
    if (data.empty()) throw std::invalid_argument("generalized Bayes factor: data must be nonempty");
    kernel.kind = cfg.kernel_kind;
    kernel.amplitude = cfg.kernel_amplitude;
    kernel.bandwidth = cfg.bandwidth > 0.0 ? cfg.bandwidth : median_heuristic(data);
    if (cfg.split_data) {
      const std::size_t half = data.size() / 2;
      if (half == 0 || half == data.size()) {
        throw std::invalid_argument("split_data requires at least two observations");
      }
      eval_data = take_rows(data, half, data.size());
    }
    m = cfg.m_model_samples > 0 ? cfg.m_model_samples : eval_data.size();
    switch (cfg.divergence) {
      case DivergenceKind::kMmdU:
        if (eval_data.size() < 2 || m < 2) {
          throw std::invalid_argument("MMD U-statistic needs at least two points per sample");
        }
        data_kernel_term = mean_kernel_offdiag(eval_data, kernel);
        break;
      case DivergenceKind::kMmdV:
        data_kernel_term = mean_kernel_full(eval_data, kernel);
        break;
      case DivergenceKind::kKsdU:
        if (eval_data.size() < 2) throw std::invalid_argument("KSD needs at least two points");
        stein = std::make_unique<SteinKernelCache>(eval_data, kernel);
        break;
      case DivergenceKind::kWassersteinPP:
        break;
    }
    (void)model;
  }

  // D_{m,n} between p_theta and the data for one parameter draw.
  double one_draw(const ParametricModel& model, const Eigen::VectorXd& theta, RngStream& rng) const {
    switch (cfg.divergence) {
      case DivergenceKind::kMmdU: {
        const Dataset ms = draw_model_sample(model, theta, m, rng);
        return mean_kernel_offdiag(ms, kernel) + data_kernel_term -
               2.0 * mean_kernel_cross(ms, eval_data, kernel);
      }
      case DivergenceKind::kMmdV: {
        const Dataset ms = draw_model_sample(model, theta, m, rng);
        return mean_kernel_full(ms, kernel) + data_kernel_term -
               2.0 * mean_kernel_cross(ms, eval_data, kernel);
      }
      case DivergenceKind::kWassersteinPP: {
        const Dataset ms = draw_model_sample(model, theta, m, rng);
        const double wpp = wasserstein_pp(ms, eval_data, cfg.wasserstein_power).value;
        // The gBF consumes the p-Wasserstein distance itself.
        return std::pow(wpp, 1.0 / cfg.wasserstein_power);
      }
      case DivergenceKind::kKsdU: {
        const auto n = static_cast<Eigen::Index>(eval_data.size());
        const auto d = static_cast<Eigen::Index>(eval_data.dim());
        Eigen::MatrixXd scores(n, d);
        Eigen::VectorXd x(d);
        for (Eigen::Index i = 0; i < n; ++i) {
          for (Eigen::Index c = 0; c < d; ++c) x(c) = eval_data.row(static_cast<std::size_t>(i))[c];
          scores.row(i) = model.score(theta, x).transpose();
        }
        if (!scores.allFinite()) {
          throw std::invalid_argument("KSD: model score not finite at a data point");
        }
        return stein->ksd_u_value(scores);
      }
    }
    return 0.0;
  }
};

double expected_divergence(const ParametricModel& model, const Dataset& data, const GbfConfig& cfg,
                           const RngStream& rng, bool posterior) {
  DivergenceWorkspace ws(model, data, cfg);
  Dataset fit_data = data;
  if (cfg.split_data) fit_data = take_rows(data, 0, data.size() / 2);
  const std::size_t draws = posterior ? cfg.n_posterior_draws : cfg.n_prior_draws;
  double acc = 0.0;
  for (std::size_t i = 0; i < draws; ++i) {
    RngStream sub = rng.substream(i);
    const Eigen::VectorXd theta =
        posterior ? model.posterior_sample(fit_data, sub) : model.prior_sample(sub);
    acc += ws.one_draw(model, theta, sub);
  }
  return acc / static_cast<double>(draws);
}

}  // namespace

void GbfConfig::validate() const {
  if (!(rate > 0.0)) throw std::invalid_argument("GbfConfig: rate must be positive");
  if (!(eta_prior > 0.0 && eta_prior < 1.0)) {
    throw std::invalid_argument("GbfConfig: eta_prior must lie in (0, 1)");
  }
  if (n_prior_draws < 1 || n_posterior_draws < 1) {
    throw std::invalid_argument("GbfConfig: draw counts must be >= 1");
  }
  if (divergence == DivergenceKind::kWassersteinPP && !(wasserstein_power >= 1.0)) {
    throw std::invalid_argument("GbfConfig: wasserstein_power >= 1 required");
  }
}

double default_gbf_rate(DivergenceKind kind) {
  return kind == DivergenceKind::kWassersteinPP ? 0.1 : 0.49;
}

double xi_transform(double x) {
  if (!(x > 0.0)) throw std::invalid_argument("xi_transform: argument must be positive");
  return std::exp(1.0 - 1.0 / x) * x;
}

MixtureWeight combine_generalized_bayes_factor(double prior_div, double post_div, std::size_t n,
                                               const GbfConfig& cfg) {
  cfg.validate();
  MixtureWeight w;
  w.prior_div = prior_div;
  w.post_div = post_div;
  const double floor = 1e-12 * std::max(prior_div, 1.0);
  const double post = std::max(post_div, floor);
  if (!(prior_div > 0.0)) throw std::invalid_argument("degenerate prior divergence");
  const double arg = prior_div / post * std::pow(static_cast<double>(n) + 1.0, -cfg.rate);
  const double odds = cfg.eta_prior / (1.0 - cfg.eta_prior);
  w.gbf = xi_transform(arg) * odds;
  w.eta_hat = std::isinf(w.gbf) ? 1.0 : w.gbf / (1.0 + w.gbf);
  return w;
}

double expected_prior_divergence(const ParametricModel& model, const Dataset& data,
                                 const GbfConfig& cfg, const RngStream& rng) {
  return expected_divergence(model, data, cfg, rng, /*posterior=*/false);
}

double expected_posterior_divergence(const ParametricModel& model, const Dataset& data,
                                     const GbfConfig& cfg, const RngStream& rng) {
  return expected_divergence(model, data, cfg, rng, /*posterior=*/true);
}

MixtureWeight generalized_bayes_factor(const ParametricModel& model, const Dataset& data,
                                       const GbfConfig& cfg, const RngStream& rng) {
  const double prior_div = expected_prior_divergence(model, data, cfg, rng.substream(1));
  const double post_div = expected_posterior_divergence(model, data, cfg, rng.substream(2));
  return combine_generalized_bayes_factor(prior_div, post_div, data.size(), cfg);
}

}  // namespace npp
