#include "npp/math.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <mutex>
#include <stdexcept>
#include <thread>

namespace npp {

double log_normal_cdf(double z) {
  if (z > -26.0) return std::log(0.5 * std::erfc(-z / kSqrt2));
  // Mills-ratio asymptotic for the far lower tail.
  const double z2 = z * z;
  const double series = 1.0 - 1.0 / z2 + 3.0 / (z2 * z2) - 15.0 / (z2 * z2 * z2);
  return -0.5 * z2 - 0.5 * kLog2Pi - std::log(-z) + std::log(series);
}

double log_normal_mass(double a, double b) {
  if (!(a < b)) return -std::numeric_limits<double>::infinity();
  const double inf = std::numeric_limits<double>::infinity();
  if (a == -inf && b == inf) return 0.0;
  if (a == -inf) return log_normal_cdf(b);
  if (b == inf) return log_normal_cdf(-a);
  if (a > 0.0) return log_normal_mass(-b, -a);  // reflect to the lower tail
  if (b > 26.0 || a < -26.0) {
    // At least one endpoint outside the erfc-exact range: difference of logs.
    const double lb = log_normal_cdf(b);
    const double la = log_normal_cdf(a);
    const double d = la - lb;
    return lb + std::log1p(-std::exp(d));
  }
  const double mass = normal_cdf(b) - normal_cdf(a);
  if (mass <= 0.0) return -std::numeric_limits<double>::infinity();
  return std::log(mass);
}

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    if (p == 0.0) return -std::numeric_limits<double>::infinity();
    if (p == 1.0) return std::numeric_limits<double>::infinity();
    throw std::invalid_argument("normal_quantile: p must be in [0, 1]");
  }
  // Acklam's approximation.
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425;
  double x;
  if (p < plow) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - plow) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log(1.0 - p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  // One Halley step against the exact CDF.
  const double e = normal_cdf(x) - p;
  const double u = e * std::sqrt(2.0 * M_PI) * std::exp(0.5 * x * x);
  x = x - u / (1.0 + 0.5 * x * u);
  return x;
}

double log_sum_exp(std::span<const double> xs) {
  LogSumAccumulator acc;
  for (double x : xs) acc.add(x);
  return acc.value();
}

namespace {

// Golub-Welsch: nodes are eigenvalues of the symmetric Jacobi matrix,
// weights are mu0 times the squared first eigenvector components.
QuadratureRule golub_welsch(const Eigen::VectorXd& diag, const Eigen::VectorXd& offdiag,
                            double mu0) {
  const int n = static_cast<int>(diag.size());
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    J(i, i) = diag(i);
    if (i + 1 < n) {
      J(i, i + 1) = offdiag(i);
      J(i + 1, i) = offdiag(i);
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
  QuadratureRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  for (int i = 0; i < n; ++i) {
    rule.nodes[i] = es.eigenvalues()(i);
    rule.weights[i] = mu0 * sq(es.eigenvectors()(0, i));
  }
  return rule;
}

}  // namespace

QuadratureRule gauss_hermite(int n) {
  if (n < 1) throw std::invalid_argument("gauss_hermite: n >= 1 required");
  Eigen::VectorXd diag = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd off(n - 1 > 0 ? n - 1 : 0);
  for (int i = 1; i < n; ++i) off(i - 1) = std::sqrt(i / 2.0);
  return golub_welsch(diag, off, std::sqrt(M_PI));
}

QuadratureRule gauss_laguerre(int n) {
  if (n < 1) throw std::invalid_argument("gauss_laguerre: n >= 1 required");
  Eigen::VectorXd diag(n);
  Eigen::VectorXd off(n - 1 > 0 ? n - 1 : 0);
  for (int i = 0; i < n; ++i) diag(i) = 2.0 * i + 1.0;
  for (int i = 1; i < n; ++i) off(i - 1) = static_cast<double>(i);
  return golub_welsch(diag, off, 1.0);
}

QuadratureRule gauss_hermite_for_normal(int n, double mean, double var) {
  if (!(var > 0.0)) throw std::invalid_argument("gauss_hermite_for_normal: var > 0 required");
  QuadratureRule rule = gauss_hermite(n);
  const double scale = std::sqrt(2.0 * var);
  const double wnorm = 1.0 / std::sqrt(M_PI);
  for (int i = 0; i < n; ++i) {
    rule.nodes[i] = mean + scale * rule.nodes[i];
    rule.weights[i] *= wnorm;
  }
  return rule;
}

void parallel_for(std::size_t count, unsigned threads, const std::function<void(std::size_t)>& fn) {
  if (count == 0) return;
  unsigned hw = std::thread::hardware_concurrency();
  if (hw == 0) hw = 1;
  unsigned t = std::min<std::size_t>(std::max(1u, std::min(threads, hw)), count);
  if (t <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(t);
  const std::size_t chunk = (count + t - 1) / t;
  std::exception_ptr err;
  std::mutex err_mu;
  for (unsigned w = 0; w < t; ++w) {
    const std::size_t lo = w * chunk;
    const std::size_t hi = std::min(count, lo + chunk);
    pool.emplace_back([&, lo, hi] {
      try {
        for (std::size_t i = lo; i < hi; ++i) fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> g(err_mu);
        if (!err) err = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  if (err) std::rethrow_exception(err);
}

}  // namespace npp
