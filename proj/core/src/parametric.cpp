#include "npp/parametric.hpp"

#include "npp/math.hpp"

#include <cmath>
#include <stdexcept>

namespace npp {

ConjugateGaussianModel::ConjugateGaussianModel(double prior_mean, double prior_var, double obs_var)
    : prior_mean_(prior_mean), prior_var_(prior_var), obs_var_(obs_var) {
  if (!(prior_var > 0.0) || !(obs_var > 0.0)) {
    throw std::invalid_argument("ConjugateGaussianModel: variances must be positive");
  }
}

GaussianPosterior ConjugateGaussianModel::posterior(const Dataset& data) const {
  if (data.dim() != 1) {
    throw std::invalid_argument("gaussian_posterior: requires 1-dimensional data");
  }
  const auto n = static_cast<double>(data.size());
  const double prec = 1.0 / prior_var_ + n / obs_var_;
  const double sum = data.size() > 0 ? data.points().sum() : 0.0;
  GaussianPosterior post;
  post.var = 1.0 / prec;
  post.mean = (prior_mean_ / prior_var_ + sum / obs_var_) / prec;
  if (data.size() > 0) post.mle = sum / n;
  return post;
}

double ConjugateGaussianModel::log_evidence(const Dataset& data) const {
  if (data.dim() != 1) throw std::invalid_argument("log_evidence: requires 1-dimensional data");
  const auto n = static_cast<double>(data.size());
  if (data.size() == 0) return 0.0;
  const double prec = 1.0 / prior_var_ + n / obs_var_;
  const double sum = data.points().sum();
  const double sumsq = data.points().array().square().sum();
  const double m = (prior_mean_ / prior_var_ + sum / obs_var_) / prec;
  return -0.5 * n * (kLog2Pi + std::log(obs_var_)) - 0.5 * std::log(prior_var_ * prec) -
         0.5 * (sumsq / obs_var_ + prior_mean_ * prior_mean_ / prior_var_ - m * m * prec);
}

Eigen::VectorXd ConjugateGaussianModel::prior_sample(RngStream& rng) const {
  Eigen::VectorXd theta(1);
  theta(0) = prior_mean_ + std::sqrt(prior_var_) * rng.normal();
  return theta;
}

Eigen::VectorXd ConjugateGaussianModel::posterior_sample(const Dataset& data, RngStream& rng) const {
  const GaussianPosterior post = posterior(data);
  Eigen::VectorXd theta(1);
  theta(0) = post.mean + std::sqrt(post.var) * rng.normal();
  return theta;
}

Eigen::VectorXd ConjugateGaussianModel::sample(const Eigen::VectorXd& theta, RngStream& rng) const {
  Eigen::VectorXd x(1);
  x(0) = theta(0) + std::sqrt(obs_var_) * rng.normal();
  return x;
}

double ConjugateGaussianModel::log_density(const Eigen::VectorXd& theta,
                                           const Eigen::VectorXd& x) const {
  return normal_logpdf(x(0), theta(0), obs_var_);
}

Eigen::VectorXd ConjugateGaussianModel::score(const Eigen::VectorXd& theta,
                                              const Eigen::VectorXd& x) const {
  Eigen::VectorXd s(1);
  s(0) = -(x(0) - theta(0)) / obs_var_;
  return s;
}

Eigen::VectorXd ConjugateGaussianModel::mle(const Dataset& data) const {
  if (data.size() == 0) throw std::invalid_argument("mle: requires at least one observation");
  if (data.dim() != 1) throw std::invalid_argument("mle: requires 1-dimensional data");
  Eigen::VectorXd theta(1);
  theta(0) = data.points().sum() / static_cast<double>(data.size());
  return theta;
}

double ConjugateGaussianModel::predictive_log_density(const Dataset& data,
                                                      const Eigen::VectorXd& x) const {
  const GaussianPosterior post = posterior(data);
  return gaussian_predictive_logpdf(post, x(0), obs_var_);
}

GaussianPosterior gaussian_posterior(const ConjugateGaussianModel& model, const Dataset& data) {
  return model.posterior(data);
}

double gaussian_predictive_logpdf(const GaussianPosterior& post, double x, double obs_var) {
  return normal_logpdf(x, post.mean, post.var + obs_var);
}

double SkewNormalTruth::logpdf(double x) const {
  const double z = (x - xi) / omega;
  return std::log(2.0) - std::log(omega) + normal_logpdf(z, 0.0, 1.0) + log_normal_cdf(alpha * z);
}

double SkewNormalTruth::cdf(double x) const {
  // Composite Simpson on the density from a point far in the left tail.
  const double lo = xi - 14.0 * omega;
  if (x <= lo) return 0.0;
  const int segments = 4000;  // even
  const double h = (x - lo) / segments;
  double acc = std::exp(logpdf(lo)) + std::exp(logpdf(x));
  for (int i = 1; i < segments; ++i) {
    const double w = (i % 2 == 0) ? 2.0 : 4.0;
    acc += w * std::exp(logpdf(lo + i * h));
  }
  return acc * h / 3.0;
}

double SkewNormalTruth::median() const {
  double lo = xi - 10.0 * omega, hi = xi + 10.0 * omega;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (cdf(mid) < 0.5) {
      lo = mid;
    } else {
      hi = mid;
    }
    if (hi - lo < 1e-13) break;
  }
  return 0.5 * (lo + hi);
}

double SkewNormalTruth::moment_mean() const {
  const double delta = alpha / std::sqrt(1.0 + alpha * alpha);
  return xi + omega * delta * std::sqrt(2.0 / M_PI);
}

double SkewNormalTruth::moment_var() const {
  const double delta = alpha / std::sqrt(1.0 + alpha * alpha);
  return omega * omega * (1.0 - 2.0 * delta * delta / M_PI);
}

double SkewNormalTruth::moment_skewness() const {
  const double delta = alpha / std::sqrt(1.0 + alpha * alpha);
  const double b = delta * std::sqrt(2.0 / M_PI);
  return 0.5 * (4.0 - M_PI) * b * b * b / std::pow(1.0 - b * b, 1.5);
}

SkewNormalTruth matched_skew_normal(double alpha) {
  if (!std::isfinite(alpha)) throw std::invalid_argument("matched_skew_normal: alpha must be finite");
  const double delta = alpha / std::sqrt(1.0 + alpha * alpha);
  SkewNormalTruth t;
  t.alpha = alpha;
  t.omega = 1.0 / std::sqrt(1.0 - 2.0 * delta * delta / M_PI);
  t.xi = -t.omega * delta * std::sqrt(2.0 / M_PI);
  return t;
}

Dataset skew_normal_sample(const SkewNormalTruth& truth, std::size_t n, RngStream& rng) {
  const double delta = truth.alpha / std::sqrt(1.0 + truth.alpha * truth.alpha);
  const double rest = std::sqrt(1.0 - delta * delta);
  RowMatrixXd pts(static_cast<Eigen::Index>(n), 1);
  for (std::size_t i = 0; i < n; ++i) {
    const double u = rng.normal();
    const double v = rng.normal();
    pts(static_cast<Eigen::Index>(i), 0) = truth.xi + truth.omega * (delta * std::abs(u) + rest * v);
  }
  return Dataset(std::move(pts));
}

Truth Truth::standard_normal() {
  Truth t;
  t.median_ = 0.0;
  return t;
}

Truth Truth::skew_normal(double alpha) {
  Truth t;
  t.skew_ = matched_skew_normal(alpha);
  t.median_ = t.skew_->median();
  return t;
}

Dataset Truth::sample(std::size_t n, RngStream& rng) const {
  if (skew_) return skew_normal_sample(*skew_, n, rng);
  RowMatrixXd pts(static_cast<Eigen::Index>(n), 1);
  for (std::size_t i = 0; i < n; ++i) pts(static_cast<Eigen::Index>(i), 0) = rng.normal();
  return Dataset(std::move(pts));
}

double Truth::log_density(double x) const {
  if (skew_) return skew_->logpdf(x);
  return normal_logpdf(x, 0.0, 1.0);
}

double Truth::median() const { return median_; }

}  // namespace npp
