#include "npp/divergence.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace npp {

namespace {

double sqdist(const double* x, const double* y, std::size_t dim) {
  double s = 0.0;
  for (std::size_t k = 0; k < dim; ++k) {
    const double d = x[k] - y[k];
    s += d * d;
  }
  return s;
}

void check_pair(const Dataset& xs, const Dataset& ys, const char* op) {
  if (xs.dim() != ys.dim()) {
    throw std::invalid_argument(std::string(op) + ": dimension mismatch");
  }
}

// Canonical argument order (size, then lexicographic) so that symmetric
// statistics accumulate in the same order under argument swap and return
// bit-identical values.
bool in_canonical_order(const Dataset& xs, const Dataset& ys) {
  if (xs.size() != ys.size()) return xs.size() < ys.size();
  const std::size_t total = xs.size() * xs.dim();
  const double* a = xs.points().data();
  const double* b = ys.points().data();
  for (std::size_t i = 0; i < total; ++i) {
    if (a[i] != b[i]) return a[i] < b[i];
  }
  return true;
}

// Exact min-cost assignment (shortest augmenting paths with potentials).
double assignment_cost(const std::vector<double>& cost, std::size_t n) {
  const double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::fill(minv.begin(), minv.end(), kInf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = kInf;
      std::size_t j1 = 0;
      const double* row = cost.data() + (i0 - 1) * n;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = row[j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  double total = 0.0;
  for (std::size_t j = 1; j <= n; ++j) total += cost[(p[j] - 1) * n + (j - 1)];
  return total;
}

double wasserstein_1d(std::vector<double> xs, std::vector<double> ys, double p) {
  std::sort(xs.begin(), xs.end());
  std::sort(ys.begin(), ys.end());
  const std::size_t m = xs.size(), n = ys.size();
  if (m == n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += std::pow(std::abs(xs[i] - ys[i]), p);
    return acc / static_cast<double>(n);
  }
  // Unequal sizes: integrate |Fx^-1(u) - Fy^-1(u)|^p over the merged quantile
  // grid; both inverse CDFs are constant between consecutive breakpoints.
  double acc = 0.0;
  std::size_t i = 0, j = 0;
  double u = 0.0;
  while (i < m && j < n) {
    const double ui = static_cast<double>(i + 1) / static_cast<double>(m);
    const double uj = static_cast<double>(j + 1) / static_cast<double>(n);
    const double next = std::min(ui, uj);
    acc += (next - u) * std::pow(std::abs(xs[i] - ys[j]), p);
    u = next;
    if (ui <= next) ++i;
    if (uj <= next) ++j;
  }
  return acc;
}

}  // namespace

double Kernel::eval(const double* x, const double* y, std::size_t dim) const {
  const double r2 = sqdist(x, y, dim);
  const double c = bandwidth;
  switch (kind) {
    case KernelKind::kImq:
      return amplitude / std::sqrt(c * c + r2);
    case KernelKind::kGaussian:
      return amplitude * std::exp(-r2 / (c * c));
  }
  return 0.0;
}

void Kernel::grad_y(const double* x, const double* y, std::size_t dim, double* out) const {
  const double r2 = sqdist(x, y, dim);
  const double c = bandwidth;
  if (kind == KernelKind::kImq) {
    const double f = amplitude * std::pow(c * c + r2, -1.5);
    for (std::size_t k = 0; k < dim; ++k) out[k] = (x[k] - y[k]) * f;
  } else {
    const double f = amplitude * std::exp(-r2 / (c * c)) * 2.0 / (c * c);
    for (std::size_t k = 0; k < dim; ++k) out[k] = (x[k] - y[k]) * f;
  }
}

void Kernel::grad_x(const double* x, const double* y, std::size_t dim, double* out) const {
  grad_y(x, y, dim, out);
  for (std::size_t k = 0; k < dim; ++k) out[k] = -out[k];
}

double Kernel::trace_hessian_xy(const double* x, const double* y, std::size_t dim) const {
  const double r2 = sqdist(x, y, dim);
  const double c = bandwidth;
  const double d = static_cast<double>(dim);
  if (kind == KernelKind::kImq) {
    const double s = c * c + r2;
    return amplitude * (d * std::pow(s, -1.5) - 3.0 * r2 * std::pow(s, -2.5));
  }
  const double k = amplitude * std::exp(-r2 / (c * c));
  return k * (2.0 * d / (c * c) - 4.0 * r2 / (c * c * c * c));
}

double median_heuristic(const Dataset& data) {
  const std::size_t n = data.size();
  if (n < 2) throw std::invalid_argument("median_heuristic: need at least two points");
  const std::size_t dim = data.dim();
  std::vector<double> dists;
  dists.reserve(n * (n - 1) / 2);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      dists.push_back(std::sqrt(sqdist(data.row(i), data.row(j), dim)));
    }
  }
  std::sort(dists.begin(), dists.end());
  const std::size_t m = dists.size();
  double med = (m % 2 == 1) ? dists[m / 2] : 0.5 * (dists[m / 2 - 1] + dists[m / 2]);
  if (med > 0.0) return med;
  for (double d : dists) {
    if (d > 0.0) return d;
  }
  return 1.0;
}

DivergenceEstimate wasserstein_pp(const Dataset& xs, const Dataset& ys, double p) {
  check_pair(xs, ys, "wasserstein_pp");
  if (xs.empty() || ys.empty()) throw std::invalid_argument("wasserstein_pp: empty input");
  if (!(p >= 1.0)) throw std::invalid_argument("wasserstein_pp: p >= 1 required");
  const std::size_t m = xs.size(), n = ys.size();
  DivergenceEstimate est{DivergenceKind::kWassersteinPP, 0.0, m, n, p};
  if (xs.dim() == 1) {
    est.value = wasserstein_1d(xs.to_scalars(), ys.to_scalars(), p);
    return est;
  }
  if (m != n) {
    throw std::invalid_argument("wasserstein_pp: unequal sample sizes supported in 1D only");
  }
  if (m * n > 1000000) {
    throw std::invalid_argument("wasserstein_pp: m*n too large for the exact solver");
  }
  const bool canonical = in_canonical_order(xs, ys);
  const Dataset& first = canonical ? xs : ys;
  const Dataset& second = canonical ? ys : xs;
  std::vector<double> cost(m * n);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      cost[i * n + j] = std::pow(std::sqrt(sqdist(first.row(i), second.row(j), xs.dim())), p);
    }
  }
  est.value = assignment_cost(cost, n) / static_cast<double>(n);
  return est;
}

double mean_kernel_full(const Dataset& xs, const Kernel& kernel) {
  const std::size_t n = xs.size(), dim = xs.dim();
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    acc += kernel.eval(xs.row(i), xs.row(i), dim);
    for (std::size_t j = i + 1; j < n; ++j) acc += 2.0 * kernel.eval(xs.row(i), xs.row(j), dim);
  }
  return acc / (static_cast<double>(n) * static_cast<double>(n));
}

double mean_kernel_offdiag(const Dataset& xs, const Kernel& kernel) {
  const std::size_t n = xs.size(), dim = xs.dim();
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) acc += 2.0 * kernel.eval(xs.row(i), xs.row(j), dim);
  }
  return acc / (static_cast<double>(n) * static_cast<double>(n - 1));
}

double mean_kernel_cross(const Dataset& xs, const Dataset& ys, const Kernel& kernel) {
  const std::size_t m = xs.size(), n = ys.size(), dim = xs.dim();
  double acc = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) acc += kernel.eval(xs.row(i), ys.row(j), dim);
  }
  return acc / (static_cast<double>(m) * static_cast<double>(n));
}

DivergenceEstimate mmd2_v(const Dataset& xs, const Dataset& ys, const Kernel& kernel) {
  check_pair(xs, ys, "mmd2_v");
  if (xs.empty() || ys.empty()) throw std::invalid_argument("mmd2_v: empty input");
  if (!in_canonical_order(xs, ys)) return mmd2_v(ys, xs, kernel);
  DivergenceEstimate est{DivergenceKind::kMmdV, 0.0, xs.size(), ys.size()};
  est.value = mean_kernel_full(xs, kernel) + mean_kernel_full(ys, kernel) -
              2.0 * mean_kernel_cross(xs, ys, kernel);
  return est;
}

DivergenceEstimate mmd2_u(const Dataset& xs, const Dataset& ys, const Kernel& kernel) {
  check_pair(xs, ys, "mmd2_u");
  if (xs.size() < 2 || ys.size() < 2) {
    throw std::invalid_argument("mmd2_u: need at least two points per sample");
  }
  if (!in_canonical_order(xs, ys)) return mmd2_u(ys, xs, kernel);
  DivergenceEstimate est{DivergenceKind::kMmdU, 0.0, xs.size(), ys.size()};
  est.value = mean_kernel_offdiag(xs, kernel) + mean_kernel_offdiag(ys, kernel) -
              2.0 * mean_kernel_cross(xs, ys, kernel);
  return est;
}

SteinKernelCache::SteinKernelCache(const Dataset& data, const Kernel& kernel)
    : n_(data.size()), dim_(data.dim()) {
  const auto n = static_cast<Eigen::Index>(n_);
  const auto d = static_cast<Eigen::Index>(dim_);
  k_.resize(n, n);
  grad_y_.resize(n, n * d);
  grad_x_.resize(n, n * d);
  trace_.resize(n, n);
  std::vector<double> buf(dim_);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      const double* xi = data.row(static_cast<std::size_t>(i));
      const double* xj = data.row(static_cast<std::size_t>(j));
      k_(i, j) = kernel.eval(xi, xj, dim_);
      trace_(i, j) = kernel.trace_hessian_xy(xi, xj, dim_);
      kernel.grad_y(xi, xj, dim_, buf.data());
      for (Eigen::Index c = 0; c < d; ++c) grad_y_(i, j * d + c) = buf[static_cast<std::size_t>(c)];
      kernel.grad_x(xi, xj, dim_, buf.data());
      for (Eigen::Index c = 0; c < d; ++c) grad_x_(i, j * d + c) = buf[static_cast<std::size_t>(c)];
    }
  }
}

double SteinKernelCache::ksd_u_value(const Eigen::MatrixXd& scores) const {
  const auto n = static_cast<Eigen::Index>(n_);
  const auto d = static_cast<Eigen::Index>(dim_);
  double acc = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i == j) continue;
      double dot_ss = 0.0, dot_igy = 0.0, dot_jgx = 0.0;
      for (Eigen::Index c = 0; c < d; ++c) {
        dot_ss += scores(i, c) * scores(j, c);
        dot_igy += scores(i, c) * grad_y_(i, j * d + c);
        dot_jgx += scores(j, c) * grad_x_(i, j * d + c);
      }
      acc += dot_ss * k_(i, j) + dot_igy + dot_jgx + trace_(i, j);
    }
  }
  return acc / (static_cast<double>(n_) * static_cast<double>(n_ - 1));
}

DivergenceEstimate ksd_u(const Dataset& xs, const ScoreFunction& score, const Kernel& kernel) {
  const std::size_t n = xs.size();
  if (n < 2) throw std::invalid_argument("ksd_u: need at least two points");
  const auto d = static_cast<Eigen::Index>(xs.dim());
  Eigen::MatrixXd scores(static_cast<Eigen::Index>(n), d);
  for (std::size_t i = 0; i < n; ++i) {
    Eigen::VectorXd x(d);
    for (Eigen::Index c = 0; c < d; ++c) x(c) = xs.row(i)[c];
    Eigen::VectorXd s = score(x);
    if (s.size() != d || !s.allFinite()) {
      throw std::invalid_argument("ksd_u: score must be finite at all data points");
    }
    scores.row(static_cast<Eigen::Index>(i)) = s.transpose();
  }
  SteinKernelCache cache(xs, kernel);
  DivergenceEstimate est{DivergenceKind::kKsdU, cache.ksd_u_value(scores), n, n};
  return est;
}

}  // namespace npp
