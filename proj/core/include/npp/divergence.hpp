#pragma once

#include "npp/dataset.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <functional>

namespace npp {

enum class KernelKind { kImq, kGaussian };

/// IMQ: amplitude * (c^2 + ||x-y||^2)^(-1/2); Gaussian: amplitude * exp(-||x-y||^2 / c^2).
/// The amplitude knob exists to exercise scale invariance of downstream
/// weights; it defaults to 1 and rescales derivatives consistently.
struct Kernel {
  KernelKind kind = KernelKind::kImq;
  double bandwidth = 1.0;
  double amplitude = 1.0;

  double eval(const double* x, const double* y, std::size_t dim) const;
  /// grad wrt the second argument, written to out[0..dim).
  void grad_y(const double* x, const double* y, std::size_t dim, double* out) const;
  /// grad wrt the first argument.
  void grad_x(const double* x, const double* y, std::size_t dim, double* out) const;
  /// trace of the mixed second derivative d^2 k / dx dy.
  double trace_hessian_xy(const double* x, const double* y, std::size_t dim) const;
};

enum class DivergenceKind { kWassersteinPP, kMmdV, kMmdU, kKsdU };

struct DivergenceEstimate {
  DivergenceKind kind;
  double value = 0.0;
  std::size_t m = 0;  // model-sample size (equals n for the one-sample KSD)
  std::size_t n = 0;  // data-sample size
  double power = 2.0; // Wasserstein order p; unused otherwise
};

/// Median of the n(n-1)/2 pairwise Euclidean distances. A zero median falls
/// back to the smallest nonzero distance, or 1 if all points coincide.
double median_heuristic(const Dataset& data);

/// W_p^p between the empirical measures of xs and ys.
/// 1D: closed-form quantile coupling (any sizes). dim > 1: exact assignment
/// between equal-size samples (m. n <= 1e6 guard).
DivergenceEstimate wasserstein_pp(const Dataset& xs, const Dataset& ys, double p);

/// Biased V-statistic: (1/m^2) sum k(x,x') + (1/n^2) sum k(y,y') - (2/mn) sum k(x,y).
DivergenceEstimate mmd2_v(const Dataset& xs, const Dataset& ys, const Kernel& kernel);

/// Unbiased U-statistic (off-diagonal self terms); may be negative.
DivergenceEstimate mmd2_u(const Dataset& xs, const Dataset& ys, const Kernel& kernel);

using ScoreFunction = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

/// One-sample KSD U-statistic of the data against the score of a model
/// density q. Only the score function is needed, never model samples.
DivergenceEstimate ksd_u(const Dataset& xs, const ScoreFunction& score, const Kernel& kernel);

/// Pairwise Stein-kernel pieces of a fixed dataset, reusable across many
/// score functions (the kernel derivative evaluations dominate the cost).
class SteinKernelCache {
 public:
  SteinKernelCache(const Dataset& data, const Kernel& kernel);

  /// KSD U-statistic for scores evaluated at the data points (n x dim).
  double ksd_u_value(const Eigen::MatrixXd& scores) const;

  std::size_t size() const { return n_; }

 private:
  std::size_t n_ = 0;
  std::size_t dim_ = 0;
  Eigen::MatrixXd k_;        // n x n kernel values
  Eigen::MatrixXd grad_y_;   // n x (n*dim), d/dy k(x_i, y_j)
  Eigen::MatrixXd grad_x_;   // n x (n*dim)
  Eigen::MatrixXd trace_;    // n x n
};

// Mean kernel sums shared by the MMD statistics and the generalized Bayes
// factor loops.
double mean_kernel_full(const Dataset& xs, const Kernel& kernel);               // sum_all / n^2
double mean_kernel_offdiag(const Dataset& xs, const Kernel& kernel);            // sum_{i != j} / (n(n-1))
double mean_kernel_cross(const Dataset& xs, const Dataset& ys, const Kernel& kernel);  // sum / (mn)

}  // namespace npp
