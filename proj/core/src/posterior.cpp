#include "npp/posterior.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace npp {

FunctionalPosterior::FunctionalPosterior(Eigen::MatrixXd values, Eigen::VectorXd weights,
                                         std::vector<Component> components)
    : values_(std::move(values)), weights_(std::move(weights)), components_(std::move(components)) {
  if (values_.rows() != weights_.size() ||
      static_cast<std::size_t>(values_.rows()) != components_.size()) {
    throw std::invalid_argument("FunctionalPosterior: inconsistent draw arrays");
  }
  if ((weights_.array() < 0.0).any()) {
    throw std::invalid_argument("FunctionalPosterior: negative weight");
  }
}

FunctionalPosterior FunctionalPosterior::equal_weight(const std::vector<double>& values,
                                                      Component c) {
  const auto n = static_cast<Eigen::Index>(values.size());
  Eigen::MatrixXd v(n, 1);
  for (Eigen::Index i = 0; i < n; ++i) v(i, 0) = values[static_cast<std::size_t>(i)];
  Eigen::VectorXd w = Eigen::VectorXd::Constant(n, n > 0 ? 1.0 / static_cast<double>(n) : 0.0);
  return FunctionalPosterior(std::move(v), std::move(w), std::vector<Component>(values.size(), c));
}

double FunctionalPosterior::component_weight(Component c) const {
  double s = 0.0;
  for (std::size_t i = 0; i < size(); ++i) {
    if (components_[i] == c) s += weights_(static_cast<Eigen::Index>(i));
  }
  return s;
}

double FunctionalPosterior::mean(std::size_t coord) const {
  if (size() == 0) throw std::invalid_argument("empty posterior");
  return weights_.dot(values_.col(static_cast<Eigen::Index>(coord)));
}

double FunctionalPosterior::prob_greater(double threshold, std::size_t coord) const {
  if (size() == 0) throw std::invalid_argument("empty posterior");
  double s = 0.0;
  for (std::size_t i = 0; i < size(); ++i) {
    if (value(i, coord) > threshold) s += weight(i);
  }
  return s;
}

double weighted_quantile(const FunctionalPosterior& post, double q, std::size_t coord) {
  if (post.size() == 0) throw std::invalid_argument("empty posterior");
  if (!(q >= 0.0 && q <= 1.0)) throw std::invalid_argument("weighted_quantile: q must be in [0, 1]");
  std::vector<std::size_t> idx(post.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return post.value(a, coord) < post.value(b, coord);
  });
  const double total = post.total_weight();
  // Tiny epsilon so that cumulative weights that equal q up to rounding count.
  const double target = q * total * (1.0 - 1e-15);
  double cum = 0.0;
  for (std::size_t k = 0; k < idx.size(); ++k) {
    cum += post.weight(idx[k]);
    if (cum >= target && cum > 0.0) return post.value(idx[k], coord);
  }
  return post.value(idx.back(), coord);
}

FunctionalPosterior mix_posteriors(const FunctionalPosterior& pm, const FunctionalPosterior& np,
                                   double eta) {
  if (!(eta >= 0.0 && eta <= 1.0)) throw std::invalid_argument("mix_posteriors: eta must be in [0, 1]");
  if (pm.output_dim() != np.output_dim()) {
    throw std::invalid_argument("mix_posteriors: output dimensions differ");
  }
  if (std::abs(pm.total_weight() - 1.0) > 1e-9 || std::abs(np.total_weight() - 1.0) > 1e-9) {
    throw std::invalid_argument("mix_posteriors: inputs must be normalized");
  }
  const auto n1 = static_cast<Eigen::Index>(pm.size());
  const auto n2 = static_cast<Eigen::Index>(np.size());
  Eigen::MatrixXd values(n1 + n2, pm.output_dim());
  Eigen::VectorXd weights(n1 + n2);
  std::vector<Component> comps;
  comps.reserve(static_cast<std::size_t>(n1 + n2));
  values.topRows(n1) = pm.values();
  values.bottomRows(n2) = np.values();
  weights.head(n1) = eta * pm.weights();
  weights.tail(n2) = (1.0 - eta) * np.weights();
  for (std::size_t i = 0; i < pm.size(); ++i) comps.push_back(pm.component(i));
  for (std::size_t i = 0; i < np.size(); ++i) comps.push_back(np.component(i));
  return FunctionalPosterior(std::move(values), std::move(weights), std::move(comps));
}

}  // namespace npp
