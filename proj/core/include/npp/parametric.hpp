#pragma once

#include "npp/dataset.hpp"
#include "npp/rng.hpp"

#include <Eigen/Dense>

#include <optional>

namespace npp {

/// Pluggable parametric Bayesian model. The generalized-Bayes machinery only
/// needs prior/posterior parameter draws plus observation sampling (and a
/// score function for the kernelized Stein discrepancy); any sampler can sit
/// behind this interface.
class ParametricModel {
 public:
  virtual ~ParametricModel() = default;

  virtual int data_dim() const = 0;

  virtual Eigen::VectorXd prior_sample(RngStream& rng) const = 0;
  virtual Eigen::VectorXd posterior_sample(const Dataset& data, RngStream& rng) const = 0;
  /// One observation from p_theta.
  virtual Eigen::VectorXd sample(const Eigen::VectorXd& theta, RngStream& rng) const = 0;
  virtual double log_density(const Eigen::VectorXd& theta, const Eigen::VectorXd& x) const = 0;
  /// Gradient of log p_theta(x) in x.
  virtual Eigen::VectorXd score(const Eigen::VectorXd& theta, const Eigen::VectorXd& x) const = 0;
  virtual Eigen::VectorXd mle(const Dataset& data) const = 0;
  virtual double predictive_log_density(const Dataset& data, const Eigen::VectorXd& x) const = 0;
};

struct GaussianPosterior {
  double mean = 0.0;
  double var = 1.0;
  std::optional<double> mle;  // sample mean; absent for n = 0
};

/// theta ~ N(prior_mean, prior_var), x | theta ~ N(theta, obs_var).
class ConjugateGaussianModel : public ParametricModel {
 public:
  ConjugateGaussianModel(double prior_mean = 0.0, double prior_var = 1.0, double obs_var = 1.0);

  double prior_mean() const { return prior_mean_; }
  double prior_var() const { return prior_var_; }
  double obs_var() const { return obs_var_; }

  GaussianPosterior posterior(const Dataset& data) const;
  /// Closed-form log marginal likelihood of the data.
  double log_evidence(const Dataset& data) const;

  int data_dim() const override { return 1; }
  Eigen::VectorXd prior_sample(RngStream& rng) const override;
  Eigen::VectorXd posterior_sample(const Dataset& data, RngStream& rng) const override;
  Eigen::VectorXd sample(const Eigen::VectorXd& theta, RngStream& rng) const override;
  double log_density(const Eigen::VectorXd& theta, const Eigen::VectorXd& x) const override;
  Eigen::VectorXd score(const Eigen::VectorXd& theta, const Eigen::VectorXd& x) const override;
  Eigen::VectorXd mle(const Dataset& data) const override;
  double predictive_log_density(const Dataset& data, const Eigen::VectorXd& x) const override;

 private:
  double prior_mean_, prior_var_, obs_var_;
};

GaussianPosterior gaussian_posterior(const ConjugateGaussianModel& model, const Dataset& data);

/// log N(x; post.mean, post.var + obs_var).
double gaussian_predictive_logpdf(const GaussianPosterior& post, double x, double obs_var = 1.0);

/// Skew-normal with shape alpha, location xi, scale omega.
struct SkewNormalTruth {
  double alpha = 0.0;
  double xi = 0.0;
  double omega = 1.0;

  double logpdf(double x) const;
  double cdf(double x) const;
  /// Median by bisection on the CDF.
  double median() const;
  double moment_mean() const;
  double moment_var() const;
  double moment_skewness() const;
};

/// Skew-normal with shape alpha whose mean is 0 and variance 1:
/// delta = alpha/sqrt(1+alpha^2), omega = 1/sqrt(1 - 2 delta^2/pi),
/// xi = -omega delta sqrt(2/pi).
SkewNormalTruth matched_skew_normal(double alpha);

/// n i.i.d. draws via the two-normal representation
/// Z = delta |U| + sqrt(1-delta^2) V, returned as xi + omega Z.
Dataset skew_normal_sample(const SkewNormalTruth& truth, std::size_t n, RngStream& rng);

/// Data-generating distribution for the synthetic studies: either the
/// standard normal (well-specified for the unit Gaussian model) or a
/// moment-matched skew normal.
class Truth {
 public:
  static Truth standard_normal();
  static Truth skew_normal(double alpha);

  Dataset sample(std::size_t n, RngStream& rng) const;
  double log_density(double x) const;
  double median() const;
  bool is_skew() const { return skew_.has_value(); }

 private:
  Truth() = default;
  std::optional<SkewNormalTruth> skew_;
  double median_ = 0.0;  // fixed at construction; instances stay immutable
};

}  // namespace npp
