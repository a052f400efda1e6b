#include "npp/functionals.hpp"

#include "npp/math.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace npp {

Functional Functional::quantile(double q) {
  if (!(q >= 0.0 && q <= 1.0)) throw std::invalid_argument("Functional: q must be in [0, 1]");
  return Functional(Kind::kQuantile, q);
}

double weighted_quantile_points(std::span<const double> points, std::span<const double> weights,
                                double q) {
  if (points.empty() || points.size() != weights.size()) {
    throw std::invalid_argument("weighted quantile: bad inputs");
  }
  if (!(q >= 0.0 && q <= 1.0)) throw std::invalid_argument("weighted quantile: q must be in [0, 1]");
  std::vector<std::size_t> idx(points.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return points[a] < points[b]; });
  double total = 0.0;
  for (double w : weights) total += w;
  const double target = q * total * (1.0 - 1e-15);
  double cum = 0.0;
  for (std::size_t k = 0; k < idx.size(); ++k) {
    cum += weights[idx[k]];
    if (cum >= target && cum > 0.0) return points[idx[k]];
  }
  return points[idx.back()];
}

double weighted_median(std::span<const double> points, std::span<const double> weights) {
  return weighted_quantile_points(points, weights, 0.5);
}

double Functional::evaluate(std::span<const double> points, std::span<const double> weights) const {
  if (points.empty() || points.size() != weights.size()) {
    throw std::invalid_argument("Functional: bad inputs");
  }
  switch (kind_) {
    case Kind::kMean: {
      double acc = 0.0, total = 0.0;
      for (std::size_t i = 0; i < points.size(); ++i) {
        acc += weights[i] * points[i];
        total += weights[i];
      }
      return acc / total;
    }
    case Kind::kMedian:
      return weighted_median(points, weights);
    case Kind::kQuantile:
      return weighted_quantile_points(points, weights, q_);
  }
  return 0.0;
}

FunctionalPosterior bayesian_bootstrap_posterior(const Dataset& data, const Functional& functional,
                                                 std::size_t n_draws, RngStream& rng) {
  if (data.empty()) throw std::invalid_argument("bayesian_bootstrap_posterior: empty data");
  const std::vector<double> pts = data.to_scalars();
  std::vector<double> w(pts.size());
  std::vector<double> values(n_draws);
  for (std::size_t d = 0; d < n_draws; ++d) {
    double total = 0.0;
    for (double& wi : w) {
      wi = rng.exponential();
      total += wi;
    }
    for (double& wi : w) wi /= total;
    values[d] = functional.evaluate(pts, w);
  }
  return FunctionalPosterior::equal_weight(values, Component::kNonparametric);
}

double dp_perturbation_weight(std::size_t n, double h, double eta) {
  if (n < 1) throw std::invalid_argument("dp_perturbation_weight: n >= 1 required");
  if (!(h > 0.0)) throw std::invalid_argument("dp_perturbation_weight: h > 0 required");
  if (!(eta > 0.0 && eta < 1.0)) {
    throw std::invalid_argument("dp_perturbation_weight: eta must lie in (0, 1)");
  }
  // 1 / (1 + ((1-eta)/eta) (1+h)^(1-n)), computed in logs.
  const double log_inv_odds =
      std::log((1.0 - eta) / eta) + (1.0 - static_cast<double>(n)) * std::log1p(h);
  if (log_inv_odds > 0.0) {
    const double inv = std::exp(-log_inv_odds);
    return inv / (1.0 + inv);
  }
  return 1.0 / (1.0 + std::exp(log_inv_odds));
}

FunctionalPosterior parametric_functional_posterior(const ConjugateGaussianModel& model,
                                                    const Dataset& data, const Functional& functional,
                                                    std::size_t n_draws, RngStream& rng) {
  const GaussianPosterior post = model.posterior(data);
  const double sd = std::sqrt(post.var);
  double shift = 0.0;
  if (functional.kind() == Functional::Kind::kQuantile) {
    shift = std::sqrt(model.obs_var()) * normal_quantile(functional.q());
  }
  std::vector<double> values(n_draws);
  for (std::size_t d = 0; d < n_draws; ++d) values[d] = post.mean + sd * rng.normal() + shift;
  return FunctionalPosterior::equal_weight(values, Component::kParametric);
}

GnppResult gnpp_functional_posterior(const Dataset& data, const ConjugateGaussianModel& model,
                                     const Functional& functional, const GbfConfig& cfg,
                                     std::size_t n_draws, const RngStream& rng) {
  if (data.empty()) throw std::invalid_argument("gnpp_functional_posterior: empty data");
  GnppResult out;
  out.weight = generalized_bayes_factor(model, data, cfg, rng.substream(0));
  RngStream pm_rng = rng.substream(1);
  RngStream np_rng = rng.substream(2);
  const FunctionalPosterior pm =
      parametric_functional_posterior(model, data, functional, n_draws, pm_rng);
  const FunctionalPosterior np = bayesian_bootstrap_posterior(data, functional, n_draws, np_rng);
  out.posterior = mix_posteriors(pm, np, out.weight.eta_hat);
  return out;
}

}  // namespace npp
