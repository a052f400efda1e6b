#include "npp/causal.hpp"

#include "npp/math.hpp"
#include "npp/parametric.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace npp {

namespace {

std::string design_column_name(std::size_t j) {
  if (j == 0) return "intercept";
  if (j == 1) return "treatment";
  return "confounder " + std::to_string(j - 2);
}

// Least squares with an optional diagonal prior precision; errors name the
// (nearly) collinear columns.
struct RidgeFit {
  Eigen::VectorXd theta_hat;
  Eigen::MatrixXd v_hat;
  double rss = 0.0;
  std::size_t dof = 0;
};

RidgeFit solve_ridge(const Eigen::MatrixXd& design, const Eigen::VectorXd& response,
                     const Eigen::VectorXd& prior_prec,
                     const std::function<std::string(std::size_t)>& name) {
  const auto n = design.rows();
  const auto p = design.cols();
  if (n <= p) throw std::invalid_argument("regression: need more rows than columns");
  Eigen::MatrixXd gram = design.transpose() * design;
  gram.diagonal() += prior_prec;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram);
  const double emin = es.eigenvalues().minCoeff();
  const double emax = es.eigenvalues().maxCoeff();
  if (!(emin > 0.0) || emax / emin >= 1e10) {
    Eigen::Index worst;
    es.eigenvectors().col(0).cwiseAbs().maxCoeff(&worst);
    std::string cols;
    for (Eigen::Index j = 0; j < p; ++j) {
      if (std::abs(es.eigenvectors()(j, 0)) > 0.3) {
        if (!cols.empty()) cols += ", ";
        cols += name(static_cast<std::size_t>(j));
      }
    }
    if (cols.empty()) cols = name(static_cast<std::size_t>(worst));
    throw std::invalid_argument("regression design is singular (collinear columns: " + cols + ")");
  }
  RidgeFit fit;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
  fit.theta_hat = ldlt.solve(design.transpose() * response);
  fit.v_hat = ldlt.solve(Eigen::MatrixXd::Identity(p, p));
  const Eigen::VectorXd resid = response - design * fit.theta_hat;
  fit.rss = resid.squaredNorm() + fit.theta_hat.dot(prior_prec.cwiseProduct(fit.theta_hat));
  fit.dof = static_cast<std::size_t>(n - p);
  return fit;
}

// sigma^2 draws from the flat-prior scaled-inverse-chi^2 with HalfNormal(0,1)
// importance log-weights.
struct SigmaDraws {
  std::vector<double> sigma;
  std::vector<double> weight;  // normalized
  bool degenerate = false;     // rss ~ 0: sigma = 0 exactly
};

SigmaDraws draw_sigmas(double rss, std::size_t dof, std::size_t n_draws, RngStream& rng) {
  SigmaDraws out;
  out.sigma.resize(n_draws);
  out.weight.assign(n_draws, 1.0 / static_cast<double>(n_draws));
  if (rss <= 1e-12) {
    std::fill(out.sigma.begin(), out.sigma.end(), 0.0);
    out.degenerate = true;
    return out;
  }
  std::vector<double> lw(n_draws);
  for (std::size_t i = 0; i < n_draws; ++i) {
    const double chi2 = 2.0 * rng.gamma(static_cast<double>(dof) / 2.0);
    const double s2 = rss / chi2;
    out.sigma[i] = std::sqrt(s2);
    // target HalfNormal(0,1) over implied prior 1/sigma
    lw[i] = std::log(out.sigma[i]) - 0.5 * s2;
  }
  const double norm = log_sum_exp(lw);
  for (std::size_t i = 0; i < n_draws; ++i) out.weight[i] = std::exp(lw[i] - norm);
  return out;
}

FunctionalPosterior zero_posterior(std::size_t n_draws, Component c) {
  return FunctionalPosterior::equal_weight(std::vector<double>(n_draws, 0.0), c);
}

// Smallest value whose cumulative weight strictly exceeds q (matches the
// order-statistic convention of ate_contrast under equal weights).
double strict_weighted_quantile(const std::vector<double>& values, const std::vector<double>& weights,
                                double q) {
  std::vector<std::size_t> idx(values.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  double total = 0.0;
  for (double w : weights) total += w;
  double cum = 0.0;
  for (std::size_t k = 0; k < idx.size(); ++k) {
    cum += weights[idx[k]];
    if (cum > q * total + 1e-12 * total) return values[idx[k]];
  }
  return values[idx.back()];
}

}  // namespace

void CausalDataset::validate() const {
  if (a.size() != y.size() || w.rows() != a.size()) {
    throw std::invalid_argument("CausalDataset: inconsistent row counts");
  }
}

Dataset CausalDataset::joint() const {
  validate();
  const auto n = a.size();
  const auto d = w.cols();
  RowMatrixXd m(n, 2 + d);
  for (Eigen::Index i = 0; i < n; ++i) {
    m(i, 0) = a(i);
    m(i, 1) = y(i);
    for (Eigen::Index c = 0; c < d; ++c) m(i, 2 + c) = w(i, c);
  }
  return Dataset(std::move(m));
}

AteContrast ate_contrast(const Eigen::VectorXd& a, double q) {
  if (a.size() < 2) throw std::invalid_argument("ate_contrast: need at least two observations");
  if (!(q > 0.0 && q < 1.0)) throw std::invalid_argument("ate_contrast: q must lie in (0, 1)");
  std::vector<double> sorted(a.data(), a.data() + a.size());
  std::sort(sorted.begin(), sorted.end());
  AteContrast c;
  c.quantile = q;
  c.lo = 0.0;
  const double n = static_cast<double>(sorted.size());
  // Smallest order statistic with rank/n strictly above q.
  auto k = static_cast<std::size_t>(std::ceil(q * n - 1e-9));
  if (static_cast<double>(k) <= q * n + 1e-9) ++k;  // rank k/n must exceed q
  if (k > sorted.size()) k = sorted.size();
  c.hi = sorted[k - 1];
  c.degenerate = sorted.front() == sorted.back() || c.hi == c.lo;
  return c;
}

LinearCausalPosterior fit_linear_causal(const CausalDataset& data) {
  data.validate();
  const auto n = data.a.size();
  const auto d = data.w.cols();
  Eigen::MatrixXd design(n, 2 + d);
  design.col(0).setOnes();
  design.col(1) = data.a;
  if (d > 0) design.rightCols(d) = data.w;
  const RidgeFit fit = solve_ridge(design, data.y, Eigen::VectorXd::Zero(2 + d), design_column_name);
  return LinearCausalPosterior{fit.theta_hat, fit.v_hat, fit.rss, fit.dof};
}

FunctionalPosterior linear_ate_posterior(const CausalDataset& data, const AteContrast& contrast,
                                         std::size_t n_draws, RngStream& rng) {
  if (n_draws < 1) throw std::invalid_argument("linear_ate_posterior: n_draws >= 1");
  if (contrast.degenerate) return zero_posterior(n_draws, Component::kParametric);
  const LinearCausalPosterior fit = fit_linear_causal(data);
  const double delta = contrast.delta();
  const double tau_hat = fit.theta_hat(1);
  const double v_tau = fit.v_hat(1, 1);
  const SigmaDraws sig = draw_sigmas(fit.rss, fit.dof, n_draws, rng);
  const auto nd = static_cast<Eigen::Index>(n_draws);
  Eigen::MatrixXd values(nd, 1);
  Eigen::VectorXd weights(nd);
  for (Eigen::Index i = 0; i < nd; ++i) {
    const double sd = std::sqrt(v_tau) * sig.sigma[static_cast<std::size_t>(i)];
    values(i, 0) = (tau_hat + sd * rng.normal()) * delta;
    weights(i) = sig.weight[static_cast<std::size_t>(i)];
  }
  return FunctionalPosterior(std::move(values), std::move(weights),
                             std::vector<Component>(n_draws, Component::kParametric));
}

double yeo_johnson(double y, double lambda) {
  if (y >= 0.0) {
    if (std::abs(lambda) < 1e-12) return std::log1p(y);
    return (std::pow(y + 1.0, lambda) - 1.0) / lambda;
  }
  if (std::abs(lambda - 2.0) < 1e-12) return -std::log1p(-y);
  return -(std::pow(1.0 - y, 2.0 - lambda) - 1.0) / (2.0 - lambda);
}

double yeo_johnson_inverse(double t, double lambda) {
  if (t >= 0.0) {
    if (std::abs(lambda) < 1e-12) return std::expm1(t);
    return std::pow(lambda * t + 1.0, 1.0 / lambda) - 1.0;
  }
  if (std::abs(lambda - 2.0) < 1e-12) return -std::expm1(-t);
  return 1.0 - std::pow(1.0 - (2.0 - lambda) * t, 1.0 / (2.0 - lambda));
}

namespace {

double yj_profile_loglik(const Eigen::VectorXd& y, double lambda) {
  const auto n = y.size();
  Eigen::VectorXd t(n);
  double jac = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    t(i) = yeo_johnson(y(i), lambda);
    const double sgn = y(i) >= 0.0 ? 1.0 : -1.0;
    jac += (lambda - 1.0) * sgn * std::log1p(std::abs(y(i)));
  }
  const double mean = t.mean();
  const double var = (t.array() - mean).square().sum() / static_cast<double>(n);
  if (var <= 0.0) return std::numeric_limits<double>::infinity();
  return -0.5 * static_cast<double>(n) * std::log(var) + jac;
}

}  // namespace

double fit_yeo_johnson_lambda(const Eigen::VectorXd& y) {
  if (y.size() < 2) return 1.0;
  double lo = -2.0, hi = 4.0;
  const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
  double x1 = hi - gr * (hi - lo);
  double x2 = lo + gr * (hi - lo);
  double f1 = yj_profile_loglik(y, x1);
  double f2 = yj_profile_loglik(y, x2);
  if (std::isinf(f1) || std::isinf(f2)) return 1.0;  // constant transformed data
  for (int it = 0; it < 200 && hi - lo > 1e-9; ++it) {
    if (f1 < f2) {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + gr * (hi - lo);
      f2 = yj_profile_loglik(y, x2);
    } else {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - gr * (hi - lo);
      f1 = yj_profile_loglik(y, x1);
    }
  }
  return 0.5 * (lo + hi);
}

void FlexibleAteConfig::validate() const {
  if (!(length_scale > 0.0)) throw std::invalid_argument("FlexibleAteConfig: length_scale > 0");
  if (ridge < 0.0) throw std::invalid_argument("FlexibleAteConfig: ridge >= 0");
}

FlexibleFit fit_flexible_regression(const CausalDataset& data, const FlexibleAteConfig& cfg,
                                    const RngStream& rng) {
  data.validate();
  cfg.validate();
  const std::size_t n = data.size();
  const std::size_t k = cfg.n_features;
  if (!(n > k / 5)) {
    throw std::invalid_argument("flexible_ate_posterior: too many random features for n");
  }
  FlexibleFit out;
  out.lambda = cfg.lambda ? *cfg.lambda : fit_yeo_johnson_lambda(data.y);
  Eigen::VectorXd t(data.y.size());
  for (Eigen::Index i = 0; i < t.size(); ++i) t(i) = yeo_johnson(data.y(i), out.lambda);

  const auto d = data.w.cols();
  RngStream feat_rng = rng.substream(0);
  Eigen::MatrixXd omega(d, static_cast<Eigen::Index>(k));
  Eigen::VectorXd phase(static_cast<Eigen::Index>(k));
  for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(k); ++j) {
    for (Eigen::Index c = 0; c < d; ++c) omega(c, j) = feat_rng.normal() / cfg.length_scale;
    phase(j) = 2.0 * M_PI * feat_rng.uniform();
  }

  const auto p = static_cast<Eigen::Index>(2 + k);
  Eigen::MatrixXd design(static_cast<Eigen::Index>(n), p);
  design.col(0).setOnes();
  if (k > 0) {
    const double scale = std::sqrt(2.0 / static_cast<double>(k));
    Eigen::MatrixXd proj = data.w * omega;  // n x k
    for (Eigen::Index i = 0; i < design.rows(); ++i) {
      for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(k); ++j) {
        design(i, 1 + j) = scale * std::cos(proj(i, j) + phase(j));
      }
    }
  }
  design.col(p - 1) = data.a;
  if (!design.allFinite() || !t.allFinite()) {
    throw std::invalid_argument("flexible_ate_posterior: non-finite features or outcomes");
  }

  Eigen::VectorXd prior_prec = Eigen::VectorXd::Zero(p);
  for (Eigen::Index j = 1; j + 1 < p; ++j) prior_prec(j) = cfg.ridge;

  const RidgeFit fit = solve_ridge(design, t, prior_prec, [&](std::size_t j) {
    if (j == 0) return std::string("intercept");
    if (j + 1 == static_cast<std::size_t>(p)) return std::string("treatment");
    return "feature " + std::to_string(j - 1);
  });
  out.theta_hat = fit.theta_hat;
  out.v_hat = fit.v_hat;
  out.rss = fit.rss;
  out.dof = fit.dof;
  out.treatment_index = static_cast<std::size_t>(p - 1);
  return out;
}

FunctionalPosterior flexible_ate_posterior(const CausalDataset& data, const AteContrast& contrast,
                                           const FlexibleAteConfig& cfg, std::size_t n_draws,
                                           const RngStream& rng) {
  if (n_draws < 1) throw std::invalid_argument("flexible_ate_posterior: n_draws >= 1");
  if (contrast.degenerate) return zero_posterior(n_draws, Component::kNonparametric);
  const FlexibleFit fit = fit_flexible_regression(data, cfg, rng);
  const double tau_hat = fit.theta_hat(static_cast<Eigen::Index>(fit.treatment_index));
  const double v_tau =
      fit.v_hat(static_cast<Eigen::Index>(fit.treatment_index), static_cast<Eigen::Index>(fit.treatment_index));

  RngStream draw_rng = rng.substream(1);
  const SigmaDraws sig = draw_sigmas(fit.rss, fit.dof, n_draws, draw_rng);

  const std::size_t n = data.size();
  std::vector<double> avec(data.a.data(), data.a.data() + data.a.size());
  std::vector<double> bb(n);
  const auto nd = static_cast<Eigen::Index>(n_draws);
  Eigen::MatrixXd values(nd, 1);
  Eigen::VectorXd weights(nd);
  for (Eigen::Index i = 0; i < nd; ++i) {
    const double sd = std::sqrt(v_tau) * sig.sigma[static_cast<std::size_t>(i)];
    const double tau = tau_hat + sd * draw_rng.normal();
    double delta = contrast.delta();
    if (cfg.covariate_bootstrap) {
      double total = 0.0;
      for (double& w : bb) {
        w = draw_rng.exponential();
        total += w;
      }
      for (double& w : bb) w /= total;
      delta = strict_weighted_quantile(avec, bb, contrast.quantile) - contrast.lo;
    }
    values(i, 0) = tau * delta;
    weights(i) = sig.weight[static_cast<std::size_t>(i)];
  }
  return FunctionalPosterior(std::move(values), std::move(weights),
                             std::vector<Component>(n_draws, Component::kNonparametric));
}

namespace {

// Joint model over (a, y, w) for the generalized Bayes factor: the
// conditional outcome is the fitted linear Gaussian, the treatment and
// confounders are bootstrapped from the observed rows. theta layout:
// [c, tau, gamma..., sigma].
class JointOutcomeModel final : public ParametricModel {
 public:
  JointOutcomeModel(const CausalDataset& data, const RngStream& rng, std::size_t pool_size = 4096)
      : data_(data), fit_(fit_linear_causal(data)) {
    RngStream pool_rng = rng.substream(0);
    chol_ = Eigen::LLT<Eigen::MatrixXd>(fit_.v_hat).matrixL();
    const SigmaDraws sig = draw_sigmas(fit_.rss, fit_.dof, pool_size, pool_rng);
    sigma_pool_ = sig.sigma;
    cum_.resize(pool_size);
    double c = 0.0;
    for (std::size_t i = 0; i < pool_size; ++i) {
      c += sig.weight[i];
      cum_[i] = c;
    }
  }

  int data_dim() const override { return static_cast<int>(2 + data_.w.cols()); }

  Eigen::VectorXd prior_sample(RngStream& rng) const override {
    const auto p = fit_.theta_hat.size();
    Eigen::VectorXd theta(p + 1);
    for (Eigen::Index j = 0; j < p; ++j) theta(j) = -100.0 + 200.0 * rng.uniform();
    theta(p) = std::abs(rng.normal());  // sigma ~ HalfNormal(0, 1)
    return theta;
  }

  Eigen::VectorXd posterior_sample(const Dataset&, RngStream& rng) const override {
    const auto p = fit_.theta_hat.size();
    const double u = rng.uniform();
    const auto it = std::lower_bound(cum_.begin(), cum_.end(), u);
    const std::size_t idx = std::min<std::size_t>(cum_.size() - 1,
                                                  static_cast<std::size_t>(it - cum_.begin()));
    const double sigma = sigma_pool_[idx];
    Eigen::VectorXd z(p);
    for (Eigen::Index j = 0; j < p; ++j) z(j) = rng.normal();
    Eigen::VectorXd theta(p + 1);
    theta.head(p) = fit_.theta_hat + sigma * (chol_ * z);
    theta(p) = sigma;
    return theta;
  }

  Eigen::VectorXd sample(const Eigen::VectorXd& theta, RngStream& rng) const override {
    const auto d = data_.w.cols();
    const auto r = static_cast<Eigen::Index>(rng.uniform_index(data_.size()));
    double mean = theta(0) + theta(1) * data_.a(r);
    for (Eigen::Index c = 0; c < d; ++c) mean += theta(2 + c) * data_.w(r, c);
    const double sigma = theta(theta.size() - 1);
    Eigen::VectorXd x(2 + d);
    x(0) = data_.a(r);
    x(1) = mean + sigma * rng.normal();
    for (Eigen::Index c = 0; c < d; ++c) x(2 + c) = data_.w(r, c);
    return x;
  }

  double log_density(const Eigen::VectorXd& theta, const Eigen::VectorXd& x) const override {
    // Conditional outcome density only; the (a, w) marginal is empirical.
    const auto d = data_.w.cols();
    double mean = theta(0) + theta(1) * x(0);
    for (Eigen::Index c = 0; c < d; ++c) mean += theta(2 + c) * x(2 + c);
    const double sigma = theta(theta.size() - 1);
    return normal_logpdf(x(1), mean, sigma * sigma);
  }

  Eigen::VectorXd score(const Eigen::VectorXd&, const Eigen::VectorXd&) const override {
    throw std::invalid_argument("joint causal model: score (KSD) is not supported");
  }

  Eigen::VectorXd mle(const Dataset&) const override {
    Eigen::VectorXd m(fit_.theta_hat.size() + 1);
    m.head(fit_.theta_hat.size()) = fit_.theta_hat;
    m(fit_.theta_hat.size()) =
        std::sqrt(fit_.rss / static_cast<double>(std::max<std::size_t>(fit_.dof, 1)));
    return m;
  }

  double predictive_log_density(const Dataset& data, const Eigen::VectorXd& x) const override {
    (void)data;
    return log_density(mle(Dataset()), x);
  }

 private:
  const CausalDataset& data_;
  LinearCausalPosterior fit_;
  Eigen::MatrixXd chol_;
  std::vector<double> sigma_pool_;
  std::vector<double> cum_;
};

}  // namespace

GnppAteResult gnpp_ate(const CausalDataset& data, const GbfConfig& gbf_cfg,
                       const FlexibleAteConfig& flex_cfg, std::size_t n_draws,
                       const RngStream& rng) {
  data.validate();
  GnppAteResult out;
  out.contrast = ate_contrast(data.a);
  if (out.contrast.degenerate) {
    // Constant treatment: every ATE is identically zero and the design is
    // collinear; report the prior mixing weight.
    out.parametric = zero_posterior(n_draws, Component::kParametric);
    out.nonparametric = zero_posterior(n_draws, Component::kNonparametric);
    out.weight.gbf = gbf_cfg.eta_prior / (1.0 - gbf_cfg.eta_prior);
    out.weight.eta_hat = gbf_cfg.eta_prior;
    out.posterior = mix_posteriors(out.parametric, out.nonparametric, out.weight.eta_hat);
    return out;
  }
  RngStream pm_rng = rng.substream(1);
  out.parametric = linear_ate_posterior(data, out.contrast, n_draws, pm_rng);
  out.nonparametric = flexible_ate_posterior(data, out.contrast, flex_cfg, n_draws, rng.substream(2));

  const JointOutcomeModel joint_model(data, rng.substream(3));
  out.weight = generalized_bayes_factor(joint_model, data.joint(), gbf_cfg, rng.substream(0));

  out.posterior = mix_posteriors(out.parametric, out.nonparametric, out.weight.eta_hat);
  out.p_positive = out.posterior.prob_greater(0.0);
  out.p_positive_parametric = out.parametric.prob_greater(0.0);
  out.p_positive_nonparametric = out.nonparametric.prob_greater(0.0);
  return out;
}

}  // namespace npp
