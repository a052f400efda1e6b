#pragma once

#include "npp/dataset.hpp"
#include "npp/gbf.hpp"
#include "npp/parametric.hpp"
#include "npp/posterior.hpp"
#include "npp/rng.hpp"

#include <cstddef>
#include <span>

namespace npp {

/// Scalar functional of a weighted empirical measure. Median is the
/// minimizer of the weighted absolute loss, resolved to the left-continuous
/// weighted 0.5-quantile.
class Functional {
 public:
  enum class Kind { kMean, kMedian, kQuantile };

  static Functional mean() { return Functional(Kind::kMean, 0.5); }
  static Functional median() { return Functional(Kind::kMedian, 0.5); }
  static Functional quantile(double q);

  Kind kind() const { return kind_; }
  double q() const { return q_; }

  double evaluate(std::span<const double> points, std::span<const double> weights) const;

 private:
  Functional(Kind kind, double q) : kind_(kind), q_(q) {}
  Kind kind_;
  double q_;
};

/// Left-continuous weighted quantile of scalar points: smallest point whose
/// cumulative (sorted) weight reaches q.
double weighted_quantile_points(std::span<const double> points, std::span<const double> weights,
                                double q);

double weighted_median(std::span<const double> points, std::span<const double> weights);

/// n_draws equal-weight draws of functional(points, w) with
/// w ~ Dirichlet(1, ..., 1); the concentration-zero Dirichlet-process
/// posterior of the functional. Component label Nonparametric.
FunctionalPosterior bayesian_bootstrap_posterior(const Dataset& data, const Functional& functional,
                                                 std::size_t n_draws, RngStream& rng);

/// Closed-form mixing weight of the plain Dirichlet-process perturbation
/// with concentration 1/h at prior weight eta and n distinct observations:
///   eta_n = 1 / (1 + ((1-eta)/eta) (1+h)^(1-n)).
/// It takes no data values at all, so it cannot react to misspecification.
double dp_perturbation_weight(std::size_t n, double h, double eta);

/// Parametric functional posterior: psi pushed through posterior theta
/// draws. For the N(theta, v) likelihood, mean and median map to theta and
/// quantile(q) to theta + sqrt(v) z_q.
FunctionalPosterior parametric_functional_posterior(const ConjugateGaussianModel& model,
                                                    const Dataset& data, const Functional& functional,
                                                    std::size_t n_draws, RngStream& rng);

struct GnppResult {
  FunctionalPosterior posterior;
  MixtureWeight weight;
};

/// Generalized-Bayes mixture of the parametric functional posterior and the
/// Bayesian bootstrap, weighted by eta_hat from the generalized Bayes
/// factor. Substreams: 0 gbf, 1 parametric draws, 2 bootstrap draws.
GnppResult gnpp_functional_posterior(const Dataset& data, const ConjugateGaussianModel& model,
                                     const Functional& functional, const GbfConfig& cfg,
                                     std::size_t n_draws, const RngStream& rng);

}  // namespace npp
