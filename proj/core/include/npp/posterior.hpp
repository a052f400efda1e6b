#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <vector>

namespace npp {

enum class Component { kParametric, kNonparametric };

/// Posterior over a functional psi(p), represented purely by weighted draws
/// with component labels. Weights sum to 1; within a mixture, the weights of
/// each component sum to that component's mixing weight. All summaries
/// (means, quantiles, tail probabilities) are weighted-sample statistics.
class FunctionalPosterior {
 public:
  FunctionalPosterior() = default;
  FunctionalPosterior(Eigen::MatrixXd values, Eigen::VectorXd weights,
                      std::vector<Component> components);

  /// Equal-weight draws of a scalar functional, all one component.
  static FunctionalPosterior equal_weight(const std::vector<double>& values, Component c);

  std::size_t size() const { return static_cast<std::size_t>(values_.rows()); }
  std::size_t output_dim() const { return static_cast<std::size_t>(values_.cols()); }

  double value(std::size_t i, std::size_t coord = 0) const {
    return values_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(coord));
  }
  double weight(std::size_t i) const { return weights_(static_cast<Eigen::Index>(i)); }
  Component component(std::size_t i) const { return components_[i]; }

  const Eigen::MatrixXd& values() const { return values_; }
  const Eigen::VectorXd& weights() const { return weights_; }

  double total_weight() const { return weights_.sum(); }
  double component_weight(Component c) const;

  double mean(std::size_t coord = 0) const;
  double prob_greater(double threshold, std::size_t coord = 0) const;

 private:
  Eigen::MatrixXd values_;  // n_draws x s
  Eigen::VectorXd weights_;
  std::vector<Component> components_;
};

/// Left-continuous weighted quantile: smallest draw value (in coordinate
/// `coord`) whose cumulative weight, with draws sorted by value, reaches q.
double weighted_quantile(const FunctionalPosterior& post, double q, std::size_t coord = 0);

/// Mixture of two normalized posteriors with weight eta on `pm`:
/// output weights are eta * pm weights together with (1 - eta) * np weights,
/// component labels preserved.
FunctionalPosterior mix_posteriors(const FunctionalPosterior& pm, const FunctionalPosterior& np,
                                   double eta);

}  // namespace npp
