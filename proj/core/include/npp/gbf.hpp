#pragma once

#include "npp/dataset.hpp"
#include "npp/divergence.hpp"
#include "npp/parametric.hpp"
#include "npp/rng.hpp"

#include <cstddef>

namespace npp {

/// Configuration of the generalized Bayes factor
///   gbf = Xi(prior_div / post_div * (n+1)^(-rate)) * eta / (1 - eta).
///
/// prior_div / post_div are Monte Carlo averages of the empirical divergence
/// between fresh model samples (m per draw) and the observed data, under
/// prior and posterior parameter draws respectively. The kernel bandwidth,
/// when left at 0, is the median heuristic of the observed data, computed
/// once and shared by both expectations.
struct GbfConfig {
  DivergenceKind divergence = DivergenceKind::kMmdU;
  double wasserstein_power = 2.0;
  KernelKind kernel_kind = KernelKind::kImq;
  double bandwidth = 0.0;  // <= 0: median heuristic of the observed data
  double kernel_amplitude = 1.0;
  double rate = 0.49;      // 0.1 is the recommended default for Wasserstein
  double eta_prior = 0.1;
  std::size_t n_prior_draws = 200;
  std::size_t n_posterior_draws = 200;
  std::size_t m_model_samples = 0;  // 0: m = n
  bool split_data = false;          // fit posterior on one half, evaluate on the other

  void validate() const;
};

/// Recommended rate hyperparameter per divergence kind.
double default_gbf_rate(DivergenceKind kind);

struct MixtureWeight {
  double gbf = 1.0;
  double eta_hat = 0.5;
  double prior_div = 0.0;
  double post_div = 0.0;
};

/// Xi(x) = exp(1 - 1/x) * x for x > 0; monotone with Xi(0+) = 0, Xi(inf) = inf.
double xi_transform(double x);

/// Scalar combination step: clamps a nonpositive posterior divergence to
/// 1e-12 * max(prior_div, 1) (unbiased statistics can dip below zero) and
/// applies Xi with the (n+1)^(-rate) discount and the prior odds.
MixtureWeight combine_generalized_bayes_factor(double prior_div, double post_div, std::size_t n,
                                               const GbfConfig& cfg);

/// Monte Carlo E[D_{m,n}(p_theta, p0)] under theta ~ prior. Draw i uses
/// rng.substream(i): theta first, then its m model samples, so any single
/// draw can be reproduced in isolation.
double expected_prior_divergence(const ParametricModel& model, const Dataset& data,
                                 const GbfConfig& cfg, const RngStream& rng);

/// Same under theta ~ posterior. With split_data the posterior is fit on the
/// first half of the data and the divergence evaluated on the second half.
double expected_posterior_divergence(const ParametricModel& model, const Dataset& data,
                                     const GbfConfig& cfg, const RngStream& rng);

/// Full pipeline; prior expectation uses rng.substream(1), posterior
/// rng.substream(2).
MixtureWeight generalized_bayes_factor(const ParametricModel& model, const Dataset& data,
                                       const GbfConfig& cfg, const RngStream& rng);

}  // namespace npp
