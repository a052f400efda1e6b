#pragma once

#include "npp/dataset.hpp"
#include "npp/gbf.hpp"
#include "npp/posterior.hpp"
#include "npp/rng.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <optional>
#include <string>

namespace npp {

/// Treatment a, outcome y, confounder rows w (n x d; d may be 0).
struct CausalDataset {
  Eigen::VectorXd a;
  Eigen::VectorXd y;
  Eigen::MatrixXd w;

  std::size_t size() const { return static_cast<std::size_t>(a.size()); }
  std::size_t n_confounders() const { return static_cast<std::size_t>(w.cols()); }
  void validate() const;

  /// Joint (a, y, w) rows as a Dataset in R^(2+d).
  Dataset joint() const;
};

/// do(a = hi) vs do(a = lo) contrast; hi is the empirical q-quantile of the
/// observed treatment (smallest value whose cumulative share strictly
/// exceeds q), lo is 0. A constant treatment is flagged degenerate: the ATE
/// scale collapses and downstream posteriors return the zero functional.
struct AteContrast {
  double hi = 0.0;
  double lo = 0.0;
  double quantile = 0.98;
  bool degenerate = false;

  double delta() const { return hi - lo; }
};

AteContrast ate_contrast(const Eigen::VectorXd& a, double q = 0.98);

/// Flat-prior least-squares posterior pieces for the design [1, a, w].
struct LinearCausalPosterior {
  Eigen::VectorXd theta_hat;  // [c, tau, gamma...]
  Eigen::MatrixXd v_hat;      // (X'X)^-1
  double rss = 0.0;
  std::size_t dof = 0;
};

LinearCausalPosterior fit_linear_causal(const CausalDataset& data);

/// ATE posterior of the linear-Gaussian outcome model: draws of
/// tau * delta(a) with tau | sigma ~ N(tau_hat, V_22 sigma^2) and sigma^2
/// drawn from the flat-prior scaled-inverse-chi^2, importance-reweighted to
/// the HalfNormal(0,1) prior on sigma. Component Parametric.
FunctionalPosterior linear_ate_posterior(const CausalDataset& data, const AteContrast& contrast,
                                         std::size_t n_draws, RngStream& rng);

// Yeo-Johnson transform.
double yeo_johnson(double y, double lambda);
double yeo_johnson_inverse(double t, double lambda);
/// Maximum-likelihood lambda via golden-section search on [-2, 4].
double fit_yeo_johnson_lambda(const Eigen::VectorXd& y);

/// Flexible outcome model: Bayesian linear regression of the Yeo-Johnson
/// transformed outcome on [1, random Fourier features of w, a], with a ridge
/// prior on the feature weights only (intercept and treatment stay flat).
struct FlexibleAteConfig {
  std::size_t n_features = 100;
  double length_scale = 1.0;
  double ridge = 1.0;
  std::optional<double> lambda;   // fit by ML when unset
  bool covariate_bootstrap = true;  // re-draw the contrast quantile per draw

  void validate() const;
};

/// Regression internals of the flexible model (exposed so the n_features = 0
/// nesting against the plain linear model is checkable exactly).
struct FlexibleFit {
  Eigen::VectorXd theta_hat;
  Eigen::MatrixXd v_hat;  // (M'M + Lambda)^-1
  double rss = 0.0;       // ||t - M theta||^2 + theta' Lambda theta
  std::size_t dof = 0;
  std::size_t treatment_index = 0;
  double lambda = 1.0;
};

FlexibleFit fit_flexible_regression(const CausalDataset& data, const FlexibleAteConfig& cfg,
                                    const RngStream& rng);

FunctionalPosterior flexible_ate_posterior(const CausalDataset& data, const AteContrast& contrast,
                                           const FlexibleAteConfig& cfg, std::size_t n_draws,
                                           const RngStream& rng);

struct GnppAteResult {
  FunctionalPosterior posterior;      // mixed
  FunctionalPosterior parametric;
  FunctionalPosterior nonparametric;
  MixtureWeight weight;
  AteContrast contrast;
  double p_positive = 0.0;
  double p_positive_parametric = 0.0;
  double p_positive_nonparametric = 0.0;
};

/// Full robust ATE workflow: linear-Gaussian parametric posterior, flexible
/// nonparametric posterior, and the generalized-Bayes mixture. The gBF runs
/// on (a, y, w) triples: model samples bootstrap (a, w) rows and draw y from
/// the fitted conditional; the improper coefficient prior is approximated by
/// U(-100, 100) per coordinate with sigma ~ HalfNormal(0, 1).
GnppAteResult gnpp_ate(const CausalDataset& data, const GbfConfig& gbf_cfg,
                       const FlexibleAteConfig& flex_cfg, std::size_t n_draws,
                       const RngStream& rng);

}  // namespace npp
