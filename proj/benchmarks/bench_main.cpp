#include "npp/divergence.hpp"
#include "npp/gbf.hpp"
#include "npp/parametric.hpp"
#include "npp/polya_tree.hpp"
#include "npp/rng.hpp"

#include <benchmark/benchmark.h>

namespace {

npp::Dataset normal_data(std::size_t n, std::uint64_t stream) {
  npp::RngStream rng(99, stream);
  return npp::Truth::standard_normal().sample(n, rng);
}

npp::Dataset normal_data_2d(std::size_t n, std::uint64_t stream) {
  npp::RngStream rng(99, stream);
  npp::RowMatrixXd pts(static_cast<Eigen::Index>(n), 2);
  for (Eigen::Index i = 0; i < pts.rows(); ++i) {
    pts(i, 0) = rng.normal();
    pts(i, 1) = rng.normal();
  }
  return npp::Dataset(std::move(pts));
}

void BM_MmdU(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto xs = normal_data(n, 1);
  const auto ys = normal_data(n, 2);
  const npp::Kernel kernel{npp::KernelKind::kImq, npp::median_heuristic(ys)};
  for (auto _ : state) {
    benchmark::DoNotOptimize(npp::mmd2_u(xs, ys, kernel).value);
  }
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_MmdU)->RangeMultiplier(2)->Range(64, 1024)->Complexity();

void BM_KsdU(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto xs = normal_data(n, 3);
  const npp::Kernel kernel{npp::KernelKind::kImq, npp::median_heuristic(xs)};
  const auto score = [](const Eigen::VectorXd& x) { return Eigen::VectorXd(-x); };
  for (auto _ : state) {
    benchmark::DoNotOptimize(npp::ksd_u(xs, score, kernel).value);
  }
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_KsdU)->RangeMultiplier(2)->Range(64, 512)->Complexity();

void BM_Wasserstein1d(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto xs = normal_data(n, 4);
  const auto ys = normal_data(n, 5);
  for (auto _ : state) {
    benchmark::DoNotOptimize(npp::wasserstein_pp(xs, ys, 2.0).value);
  }
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_Wasserstein1d)->RangeMultiplier(4)->Range(256, 4096)->Complexity();

void BM_WassersteinAssignment2d(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto xs = normal_data_2d(n, 6);
  const auto ys = normal_data_2d(n, 7);
  for (auto _ : state) {
    benchmark::DoNotOptimize(npp::wasserstein_pp(xs, ys, 2.0).value);
  }
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_WassersteinAssignment2d)->RangeMultiplier(2)->Range(32, 256)->Complexity();

void BM_PolyaTreeEvidence(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto xs = normal_data(n, 8);
  const npp::ConjugateGaussianModel model;
  npp::PolyaTreeConfig cfg;
  for (auto _ : state) {
    benchmark::DoNotOptimize(npp::pt_perturbation_evidence(xs, model, cfg));
  }
}
BENCHMARK(BM_PolyaTreeEvidence)->Arg(20)->Arg(100)->Arg(500);

void BM_GeneralizedBayesFactor(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto xs = normal_data(n, 9);
  const npp::ConjugateGaussianModel model;
  npp::GbfConfig cfg;
  cfg.n_prior_draws = 50;
  cfg.n_posterior_draws = 50;
  const npp::RngStream rng(99, 17);
  for (auto _ : state) {
    benchmark::DoNotOptimize(npp::generalized_bayes_factor(model, xs, cfg, rng).eta_hat);
  }
}
BENCHMARK(BM_GeneralizedBayesFactor)->Arg(100)->Arg(500);

}  // namespace

BENCHMARK_MAIN();
