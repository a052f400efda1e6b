#include "npp/divergence.hpp"

#include "npp/math.hpp"
#include "npp/parametric.hpp"
#include "npp/rng.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "test_util.hpp"

using namespace npp;

namespace {

Dataset normal_data(std::size_t n, std::uint64_t seed, std::uint64_t stream, double shift = 0.0) {
  RngStream rng(seed, stream);
  std::vector<double> xs(n);
  for (double& x : xs) x = shift + rng.normal();
  return Dataset::scalars(xs);
}

// Exhaustive assignment oracle: minimum over all permutations.
double brute_force_wpp(const Dataset& xs, const Dataset& ys, double p) {
  const std::size_t n = xs.size();
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double d2 = 0.0;
      for (std::size_t c = 0; c < xs.dim(); ++c) {
        const double d = xs.row(i)[c] - ys.row(perm[i])[c];
        d2 += d * d;
      }
      acc += std::pow(std::sqrt(d2), p);
    }
    best = std::min(best, acc);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best / static_cast<double>(n);
}

// Exact Riemann oracle for the unequal-size 1D form: the merged inverse-CDF
// integrand is constant on multiples of 1/(mn), so 2mn midpoints are exact.
double riemann_wpp_1d(std::vector<double> xs, std::vector<double> ys, double p) {
  std::sort(xs.begin(), xs.end());
  std::sort(ys.begin(), ys.end());
  const std::size_t m = xs.size(), n = ys.size();
  const std::size_t grid = 2 * m * n;
  double acc = 0.0;
  for (std::size_t k = 0; k < grid; ++k) {
    const double u = (static_cast<double>(k) + 0.5) / static_cast<double>(grid);
    const auto i = static_cast<std::size_t>(std::ceil(u * static_cast<double>(m))) - 1;
    const auto j = static_cast<std::size_t>(std::ceil(u * static_cast<double>(n))) - 1;
    acc += std::pow(std::abs(xs[i] - ys[j]), p);
  }
  return acc / static_cast<double>(grid);
}

double population_gaussian_mmd2(double mu_shift, double c) {
  // E k(X, Y) for X - Y ~ N(mu, 2) under k = exp(-d^2/c^2).
  const auto term = [&](double mu, double s2) {
    return std::exp(-mu * mu / (c * c + 2.0 * s2)) / std::sqrt(1.0 + 2.0 * s2 / (c * c));
  };
  return 2.0 * term(0.0, 2.0) - 2.0 * term(mu_shift, 2.0);
}

}  // namespace

TEST_SUITE_BEGIN("divergence");

TEST_CASE("median_heuristic enumerable cases") {
  CHECK(median_heuristic(Dataset::scalars({0.0, 2.0})) == 2.0);
  CHECK(median_heuristic(Dataset::scalars({0.0, 1.0, 3.0})) == 2.0);
  // Zero median falls back to the smallest nonzero distance, then to 1.
  CHECK(median_heuristic(Dataset::scalars({0.0, 0.0, 0.0, 0.0, 5.0})) == 5.0);
  CHECK(median_heuristic(Dataset::scalars({2.0, 2.0, 2.0})) == 1.0);
  CHECK_THROWS_AS(static_cast<void>(median_heuristic(Dataset::scalars({1.0}))),
                  std::invalid_argument);
}

TEST_CASE("median_heuristic on standard normal data (Monte Carlo oracle)") {
  const double value = median_heuristic(normal_data(500, 77, 0));
  // Oracle: median of |X - X'| with X - X' ~ N(0, 2) from a large
  // independent-pairs sample.
  RngStream rng(78, 0);
  std::vector<double> diffs(2000000);
  for (double& d : diffs) d = std::abs(rng.normal() - rng.normal());
  const double oracle = npptest::median_of(diffs);
  CHECK(oracle == doctest::Approx(std::sqrt(2.0) * normal_quantile(0.75)).epsilon(2e-3));
  CHECK(std::abs(value - oracle) < 0.1);
}

TEST_CASE("wasserstein_pp point masses and identical samples") {
  const auto single = wasserstein_pp(Dataset::scalars({0.0}), Dataset::scalars({3.0}), 2.0);
  CHECK(single.value == doctest::Approx(9.0).epsilon(1e-15));
  CHECK(single.kind == DivergenceKind::kWassersteinPP);
  CHECK(single.power == 2.0);

  for (double p : {1.0, 2.0, 3.0}) {
    CHECK(wasserstein_pp(Dataset::scalars({0.0, 1.0}), Dataset::scalars({0.0, 1.0}), p).value ==
          0.0);
  }
}

TEST_CASE("wasserstein_pp small instance equals the coupling oracle") {
  const Dataset xs = Dataset::scalars({0.0, 2.0});
  const Dataset ys = Dataset::scalars({1.0, 3.0});
  CHECK(wasserstein_pp(xs, ys, 1.0).value == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(brute_force_wpp(xs, ys, 1.0) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("wasserstein_pp equals the exhaustive assignment oracle (1D and 2D)") {
  RngStream rng(123, 0);
  for (int rep = 0; rep < 200; ++rep) {
    const std::size_t n = 1 + rng.uniform_index(6);
    const std::size_t dim = 1 + rng.uniform_index(2);
    const double p = (rep % 3 == 0) ? 1.0 : (rep % 3 == 1 ? 2.0 : 3.0);
    RowMatrixXd a(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
    RowMatrixXd b(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
      for (Eigen::Index c = 0; c < a.cols(); ++c) {
        a(i, c) = rng.normal();
        b(i, c) = rng.normal();
      }
    }
    const Dataset xs{a}, ys{b};
    const double got = wasserstein_pp(xs, ys, p).value;
    const double want = brute_force_wpp(xs, ys, p);
    CHECK(got == doctest::Approx(want).epsilon(1e-12));
  }
}

TEST_CASE("wasserstein_pp unequal sizes in 1D match the quantile-grid oracle") {
  RngStream rng(124, 0);
  for (int rep = 0; rep < 40; ++rep) {
    const std::size_t m = 1 + rng.uniform_index(9);
    const std::size_t n = 1 + rng.uniform_index(9);
    std::vector<double> xs(m), ys(n);
    for (double& x : xs) x = rng.normal();
    for (double& y : ys) y = rng.normal();
    const double p = 1.0 + static_cast<double>(rng.uniform_index(3));
    const double got = wasserstein_pp(Dataset::scalars(xs), Dataset::scalars(ys), p).value;
    CHECK(got == doctest::Approx(riemann_wpp_1d(xs, ys, p)).epsilon(1e-12));
  }
}

TEST_CASE("wasserstein_pp input validation") {
  RowMatrixXd two(2, 2);
  two.setZero();
  CHECK_THROWS_AS(static_cast<void>(wasserstein_pp(Dataset(two), Dataset::scalars({1.0}), 2.0)),
                  std::invalid_argument);
  CHECK_THROWS_AS(static_cast<void>(wasserstein_pp(Dataset(), Dataset::scalars({1.0}), 2.0)),
                  std::invalid_argument);
  CHECK_THROWS_AS(static_cast<void>(wasserstein_pp(Dataset::scalars({1.0}),
                                                   Dataset::scalars({1.0}), 0.5)),
                  std::invalid_argument);
  RowMatrixXd three(3, 2);
  three.setZero();
  CHECK_THROWS_AS(static_cast<void>(wasserstein_pp(Dataset(two), Dataset(three), 2.0)),
                  std::invalid_argument);  // unequal sizes, dim > 1
  RowMatrixXd big(1001, 2);
  big.setZero();
  CHECK_THROWS_AS(static_cast<void>(wasserstein_pp(Dataset(big), Dataset(big), 2.0)),
                  std::invalid_argument);  // m * n > 1e6
}

TEST_CASE("divergences are symmetric in their arguments") {
  RngStream rng(125, 0);
  for (int rep = 0; rep < 50; ++rep) {
    const std::size_t n = 2 + rng.uniform_index(10);
    const std::size_t m = 2 + rng.uniform_index(10);
    std::vector<double> xs(m), ys(n);
    for (double& x : xs) x = rng.normal();
    for (double& y : ys) y = rng.normal();
    const Dataset dx = Dataset::scalars(xs), dy = Dataset::scalars(ys);
    const Kernel kernel{KernelKind::kImq, 0.9};
    CHECK(wasserstein_pp(dx, dy, 2.0).value == wasserstein_pp(dy, dx, 2.0).value);
    CHECK(mmd2_v(dx, dy, kernel).value == mmd2_v(dy, dx, kernel).value);
    CHECK(mmd2_u(dx, dy, kernel).value == mmd2_u(dy, dx, kernel).value);
  }
}

TEST_CASE("mmd2_v identical samples and the three-evaluation hand sum") {
  const Dataset xs = normal_data(40, 9, 1);
  const Kernel kernel{KernelKind::kImq, 1.3};
  CHECK(std::abs(mmd2_v(xs, xs, kernel).value) <= 1e-12);

  const Kernel gauss{KernelKind::kGaussian, std::sqrt(2.0)};
  const double v = mmd2_v(Dataset::scalars({0.0}), Dataset::scalars({1.0}), gauss).value;
  CHECK(v == doctest::Approx(2.0 - 2.0 * std::exp(-0.5)).epsilon(1e-15));
  CHECK(v == doctest::Approx(0.7869386805747332).epsilon(1e-12));
}

TEST_CASE("mmd2_v is nonnegative on random inputs") {
  RngStream rng(126, 0);
  for (int rep = 0; rep < 50; ++rep) {
    const Dataset xs = normal_data(3 + rng.uniform_index(30), 126, 10 + rep);
    const Dataset ys = normal_data(3 + rng.uniform_index(30), 126, 100 + rep, rng.normal());
    const Kernel kernel{rep % 2 == 0 ? KernelKind::kImq : KernelKind::kGaussian,
                        0.3 + 2.0 * rng.uniform()};
    CHECK(mmd2_v(xs, ys, kernel).value >= -1e-12);
  }
}

TEST_CASE("mmd2_u degenerate atoms and V/U gap bound") {
  const Kernel kernel{KernelKind::kImq, 1.0};
  CHECK(mmd2_u(Dataset::scalars({0.0, 0.0}), Dataset::scalars({0.0, 0.0}), kernel).value == 0.0);

  RngStream rng(127, 0);
  for (int rep = 0; rep < 50; ++rep) {
    const std::size_t m = 2 + rng.uniform_index(20);
    const std::size_t n = 2 + rng.uniform_index(20);
    const Dataset xs = normal_data(m, 127, 10 + rep);
    const Dataset ys = normal_data(n, 127, 100 + rep, 0.5);
    const bool imq = rep % 2 == 0;
    const Kernel k{imq ? KernelKind::kImq : KernelKind::kGaussian, 0.5 + rng.uniform()};
    const double sup_k = imq ? 1.0 / k.bandwidth : 1.0;
    const double gap = std::abs(mmd2_v(xs, ys, k).value - mmd2_u(xs, ys, k).value);
    CHECK(gap <= 2.0 * sup_k * (1.0 / static_cast<double>(m) + 1.0 / static_cast<double>(n)) +
                     1e-12);
  }
}

TEST_CASE("mmd2_u is unbiased for the population MMD (closed-form oracle)") {
  const double c = 2.0;
  const double pop = population_gaussian_mmd2(1.0, c);
  CHECK(pop == doctest::Approx(0.16617447398571228).epsilon(1e-12));

  // Validate the closed form itself by tensorized Gauss-Hermite integration.
  const auto rule = gauss_hermite_for_normal(48, 0.0, 1.0);
  const Kernel gk{KernelKind::kGaussian, c};
  double e_pp = 0.0, e_pq = 0.0;
  for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
    for (std::size_t j = 0; j < rule.nodes.size(); ++j) {
      const double xi = rule.nodes[i];
      const double yj = rule.nodes[j];
      const double yq = rule.nodes[j] + 1.0;
      e_pp += rule.weights[i] * rule.weights[j] * gk.eval(&xi, &yj, 1);
      e_pq += rule.weights[i] * rule.weights[j] * gk.eval(&xi, &yq, 1);
    }
  }
  CHECK(2.0 * (e_pp - e_pq) == doctest::Approx(pop).epsilon(1e-10));

  const int reps = 2000;
  std::vector<double> values(reps);
  for (int r = 0; r < reps; ++r) {
    const Dataset xs = normal_data(50, 500, static_cast<std::uint64_t>(2 * r));
    const Dataset ys = normal_data(50, 500, static_cast<std::uint64_t>(2 * r + 1), 1.0);
    values[static_cast<std::size_t>(r)] = mmd2_u(xs, ys, gk).value;
  }
  const double mean = npptest::mean_of(values);
  const double se = std::sqrt(npptest::var_of(values) / reps);
  CHECK(std::abs(mean - pop) <= 3.0 * se);
}

TEST_CASE("kernel derivatives match central finite differences") {
  RngStream rng(128, 0);
  const double h = 1e-5;
  for (int rep = 0; rep < 20; ++rep) {
    for (std::size_t dim : {std::size_t{1}, std::size_t{3}}) {
      std::vector<double> x(dim), y(dim);
      for (std::size_t c = 0; c < dim; ++c) {
        x[c] = rng.normal();
        y[c] = rng.normal();
      }
      const Kernel kernel{rep % 2 == 0 ? KernelKind::kImq : KernelKind::kGaussian,
                          0.6 + rng.uniform(), 1.0 + rng.uniform()};
      std::vector<double> gx(dim), gy(dim);
      kernel.grad_x(x.data(), y.data(), dim, gx.data());
      kernel.grad_y(x.data(), y.data(), dim, gy.data());
      double trace_fd = 0.0;
      for (std::size_t c = 0; c < dim; ++c) {
        auto xp = x, xm = x, yp = y, ym = y;
        xp[c] += h;
        xm[c] -= h;
        yp[c] += h;
        ym[c] -= h;
        const double fd_x =
            (kernel.eval(xp.data(), y.data(), dim) - kernel.eval(xm.data(), y.data(), dim)) /
            (2.0 * h);
        const double fd_y =
            (kernel.eval(x.data(), yp.data(), dim) - kernel.eval(x.data(), ym.data(), dim)) /
            (2.0 * h);
        CHECK(gx[c] == doctest::Approx(fd_x).epsilon(1e-6));
        CHECK(gy[c] == doctest::Approx(fd_y).epsilon(1e-6));
        trace_fd += (kernel.eval(xp.data(), yp.data(), dim) - kernel.eval(xp.data(), ym.data(), dim) -
                     kernel.eval(xm.data(), yp.data(), dim) + kernel.eval(xm.data(), ym.data(), dim)) /
                    (4.0 * h * h);
      }
      CHECK(kernel.trace_hessian_xy(x.data(), y.data(), dim) ==
            doctest::Approx(trace_fd).epsilon(1e-5));
    }
  }
}

TEST_CASE("ksd_u two-point value against a finite-difference Stein kernel") {
  const Kernel kernel{KernelKind::kImq, 1.0};
  const auto score = [](const Eigen::VectorXd& x) { return Eigen::VectorXd(-x); };
  const Dataset xs = Dataset::scalars({0.0, 1.0});
  const double got = ksd_u(xs, score, kernel).value;

  // Independent evaluation of u(x, x') from kernel values only.
  const double h = 1e-5;
  auto k1 = [&](double a, double b) { return kernel.eval(&a, &b, 1); };
  auto u_fd = [&](double a, double b) {
    const double grad_b = (k1(a, b + h) - k1(a, b - h)) / (2.0 * h);
    const double grad_a = (k1(a + h, b) - k1(a - h, b)) / (2.0 * h);
    const double cross =
        (k1(a + h, b + h) - k1(a + h, b - h) - k1(a - h, b + h) + k1(a - h, b - h)) / (4.0 * h * h);
    return (-a) * k1(a, b) * (-b) + (-a) * grad_b + (-b) * grad_a + cross;
  };
  const double want = 0.5 * (u_fd(0.0, 1.0) + u_fd(1.0, 0.0));
  CHECK(got == doctest::Approx(want).epsilon(1e-6));
  CHECK(got == doctest::Approx(-3.0 / std::pow(2.0, 2.5)).epsilon(1e-12));
}

TEST_CASE("ksd_u is centered at zero under the model") {
  const Kernel kernel{KernelKind::kImq, 1.0};
  const auto score = [](const Eigen::VectorXd& x) { return Eigen::VectorXd(-x); };
  const int reps = 500;
  std::vector<double> values(reps);
  for (int r = 0; r < reps; ++r) {
    values[static_cast<std::size_t>(r)] =
        ksd_u(normal_data(100, 321, static_cast<std::uint64_t>(r)), score, kernel).value;
  }
  const double mean = npptest::mean_of(values);
  const double se = std::sqrt(npptest::var_of(values) / reps);
  CHECK(std::abs(mean) <= 3.0 * se);
}

TEST_CASE("ksd_u input validation") {
  const Kernel kernel{KernelKind::kImq, 1.0};
  const auto score = [](const Eigen::VectorXd& x) { return Eigen::VectorXd(-x); };
  CHECK_THROWS_AS(static_cast<void>(ksd_u(Dataset::scalars({1.0}), score, kernel)),
                  std::invalid_argument);
  const auto bad_score = [](const Eigen::VectorXd& x) {
    Eigen::VectorXd s(x.size());
    s.setConstant(std::numeric_limits<double>::quiet_NaN());
    return s;
  };
  CHECK_THROWS_AS(static_cast<void>(ksd_u(Dataset::scalars({0.0, 1.0}), bad_score, kernel)),
                  std::invalid_argument);
}

TEST_CASE("well-specified convergence: MMD-U centered, squared Wasserstein decays") {
  const std::vector<std::size_t> grid{25, 50, 100, 200, 400, 800};
  const Kernel kernel{KernelKind::kImq, 1.0};
  std::vector<double> log_n, log_w;
  double prev_w = std::numeric_limits<double>::infinity();
  for (std::size_t n : grid) {
    const int reps = 100;
    std::vector<double> mmd(reps), wpp(reps);
    for (int r = 0; r < reps; ++r) {
      const auto xs = normal_data(n, 600 + n, static_cast<std::uint64_t>(2 * r));
      const auto ys = normal_data(n, 600 + n, static_cast<std::uint64_t>(2 * r + 1));
      mmd[static_cast<std::size_t>(r)] = mmd2_u(xs, ys, kernel).value;
      wpp[static_cast<std::size_t>(r)] = wasserstein_pp(xs, ys, 2.0).value;
    }
    const double mmd_mean = npptest::mean_of(mmd);
    const double mmd_se = std::sqrt(npptest::var_of(mmd) / reps);
    CHECK(std::abs(mmd_mean) <= 3.0 * mmd_se);

    const double w_mean = npptest::mean_of(wpp);
    CHECK(w_mean < prev_w);
    prev_w = w_mean;
    log_n.push_back(std::log(static_cast<double>(n)));
    log_w.push_back(std::log(w_mean));
  }
  CHECK(npptest::ols_slope(log_n, log_w) < -0.4);
}

TEST_SUITE_END();
