#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <utility>
#include <vector>

namespace npp {

inline constexpr double kLog2Pi = 1.8378770664093454835606594728112;
inline constexpr double kSqrt2 = 1.4142135623730950488016887242097;

inline double sq(double x) { return x * x; }

/// log of the Beta function.
inline double log_beta(double a, double b) {
  return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
}

inline double normal_logpdf(double x, double mean, double var) {
  const double d = x - mean;
  return -0.5 * (kLog2Pi + std::log(var) + d * d / var);
}

inline double normal_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI); }

/// Standard normal CDF.
inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / kSqrt2); }

/// log Phi(z), stable deep into the lower tail.
double log_normal_cdf(double z);

/// log(Phi(b) - Phi(a)) for z-scores a < b; stable in both tails.
double log_normal_mass(double a, double b);

/// Inverse standard normal CDF (Acklam's rational approximation plus one
/// Halley refinement against erfc; ~1e-15 absolute).
double normal_quantile(double p);

double log_sum_exp(std::span<const double> xs);

/// Streaming log-sum-exp accumulator with running-max rescaling.
class LogSumAccumulator {
 public:
  void add(double log_term) {
    if (log_term == -std::numeric_limits<double>::infinity()) return;
    if (log_term <= max_) {
      // Terms 60 nats under the peak are below 1e-26 relative; skip the exp.
      if (log_term > max_ - 60.0) sum_ += std::exp(log_term - max_);
    } else {
      sum_ = sum_ * std::exp(max_ - log_term) + 1.0;
      max_ = log_term;
    }
  }
  double value() const {
    if (sum_ == 0.0) return -std::numeric_limits<double>::infinity();
    return max_ + std::log(sum_);
  }

 private:
  double max_ = -std::numeric_limits<double>::infinity();
  double sum_ = 0.0;
};

struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// Gauss–Hermite rule for weight exp(-t^2) (physicists' convention).
QuadratureRule gauss_hermite(int n);

/// Gauss–Laguerre rule for weight exp(-x) on [0, inf); weights sum to 1.
QuadratureRule gauss_laguerre(int n);

/// Gauss–Hermite rule transformed to integrate g against N(mean, var):
/// sum_i w_i g(x_i) ~ E[g(X)], weights sum to 1.
QuadratureRule gauss_hermite_for_normal(int n, double mean, double var);

/// Runs fn(i) for i in [0, count) across up to `threads` workers. Work is
/// split in contiguous blocks; fn must only touch slot i, so the result is
/// independent of scheduling.
void parallel_for(std::size_t count, unsigned threads, const std::function<void(std::size_t)>& fn);

}  // namespace npp
