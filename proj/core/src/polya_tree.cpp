#include "npp/polya_tree.hpp"

#include "npp/math.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace npp {

namespace {

constexpr double kLog2 = 0.6931471805599453094172321214582;

void check_pt_inputs(const Dataset& data, double h) {
  if (data.dim() != 1) throw std::invalid_argument("polya tree: requires 1-dimensional data");
  if (!(h > 0.0)) throw std::invalid_argument("polya tree: h must be positive");
}

inline double level_alpha(const PolyaTreeConfig& cfg, double h, int level) {
  return cfg.level_coeff * h * std::pow(static_cast<double>(level), cfg.level_power);
}

// Normalized exp-sinh discretization of integrals against exp(-h) dh; double
// exponential convergence even through the h -> 0 endpoint behavior of the
// tree corrections, where Gauss-Laguerre stalls near 1e-5.
std::vector<std::pair<double, double>> exp_sinh_pairs(int n) {
  const double tmax = std::asinh(2.0 / M_PI * std::log(1e12));
  const double tmin = -std::asinh(2.0 / M_PI * 40.0);
  const double delta = (tmax - tmin) / (n - 1);
  std::vector<std::pair<double, double>> out;
  for (int k = 0; k < n; ++k) {
    const double t = tmin + k * delta;
    const double h = std::exp(0.5 * M_PI * std::sinh(t));
    const double w = 0.5 * M_PI * std::cosh(t) * h * delta * std::exp(-h);
    if (w > 1e-300) out.push_back({h, w});
  }
  double total = 0.0;
  for (const auto& [h, w] : out) total += w;
  for (auto& [h, w] : out) w /= total;
  return out;
}

std::vector<std::pair<double, double>> laguerre_pairs(int n) {
  const QuadratureRule rule = gauss_laguerre(n);
  std::vector<std::pair<double, double>> out(rule.nodes.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = {rule.nodes[i], rule.weights[i]};
  return out;
}

}  // namespace

void PolyaTreeConfig::validate() const {
  if (depth < 0) throw std::invalid_argument("PolyaTreeConfig: depth must be >= 0");
  if (depth > 24) throw std::invalid_argument("PolyaTreeConfig: depth too large");
  if (h_quadrature.empty() && h_nodes < 1) {
    throw std::invalid_argument("PolyaTreeConfig: h_nodes must be >= 1");
  }
  if (theta_nodes < 1) throw std::invalid_argument("PolyaTreeConfig: theta_nodes must be >= 1");
  if (!h_quadrature.empty()) {
    double total = 0.0;
    for (const auto& [node, weight] : h_quadrature) {
      if (!(node > 0.0) || !(weight > 0.0)) {
        throw std::invalid_argument("PolyaTreeConfig: h quadrature nodes/weights must be positive");
      }
      total += weight;
    }
    if (std::abs(total - 1.0) > 1e-10) {
      throw std::invalid_argument("PolyaTreeConfig: h quadrature weights must sum to 1");
    }
  }
}

std::vector<std::pair<double, double>> PolyaTreeConfig::resolve_h_rule() const {
  validate();
  if (!h_quadrature.empty()) return h_quadrature;
  return h_laguerre ? laguerre_pairs(h_nodes) : exp_sinh_pairs(h_nodes);
}

DyadicTree::DyadicTree(const Dataset& data, double theta_in, int depth_in, double obs_var)
    : theta(theta_in), depth(depth_in) {
  if (data.dim() != 1) throw std::invalid_argument("DyadicTree: requires 1-dimensional data");
  const double sigma = std::sqrt(obs_var);
  level_counts.resize(static_cast<std::size_t>(depth) + 1);
  for (int j = 0; j <= depth; ++j) level_counts[static_cast<std::size_t>(j)].assign(1u << j, 0);
  const int leaves = 1 << depth;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double u = normal_cdf((data.scalar(i) - theta) / sigma);
    int cell = static_cast<int>(u * leaves);
    cell = std::clamp(cell, 0, leaves - 1);
    for (int j = depth; j >= 0; --j) {
      ++level_counts[static_cast<std::size_t>(j)][static_cast<std::size_t>(cell)];
      cell >>= 1;
    }
  }
}

double pt_log_marginal(double theta, double h, const Dataset& data, const PolyaTreeConfig& cfg,
                       const ConjugateGaussianModel& model) {
  check_pt_inputs(data, h);
  cfg.validate();
  double base = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    base += normal_logpdf(data.scalar(i), theta, model.obs_var());
  }
  if (cfg.depth == 0 || data.empty()) return base;
  const DyadicTree tree(data, theta, cfg.depth, model.obs_var());
  double corr = 0.0;
  for (int j = 1; j <= cfg.depth; ++j) {
    const double alpha = level_alpha(cfg, h, j);
    const double log_b0 = log_beta(alpha, alpha);
    const auto& child = tree.level_counts[static_cast<std::size_t>(j)];
    for (std::size_t node = 0; node < child.size() / 2; ++node) {
      const std::int32_t n0 = child[2 * node];
      const std::int32_t n1 = child[2 * node + 1];
      if (n0 + n1 == 0) continue;
      corr += log_beta(alpha + n0, alpha + n1) - log_b0 + (n0 + n1) * kLog2;
    }
  }
  return base + corr;
}

namespace {

// Exact theta integration machinery. The branch corrections are piecewise
// constant in theta with breakpoints theta = x_i - sigma * z_k at the dyadic
// base quantiles z_k; between breakpoints the integrand is
// exp(corr) * Z_pm * N(theta; m_n, v_n), whose segment mass is a Phi
// difference. Sweeping theta upward, each breakpoint moves one observation
// one cell to the left on levels J - ctz(k) .. J, and the Beta corrections
// update by single log ratios.
// Observer hooks into the sweep: per-segment corr values plus count-state
// snapshots at requested theta locations.
struct SweepObserver {
  std::function<void(double theta_lo, double theta_hi, std::span<const double> corr)> on_segment;
  std::vector<double> snapshot_at;  // ascending
  std::function<void(std::size_t index, const std::vector<std::vector<std::int32_t>>& counts)>
      on_snapshot;
};

struct EvidenceSweep {
  const Dataset& data;
  const ConjugateGaussianModel& model;
  const std::vector<double>& hs;
  const PolyaTreeConfig& cfg;
  int depth;

  std::vector<double> run(SweepObserver* obs = nullptr) const {
    const std::size_t n = data.size();
    const std::size_t n_h = hs.size();
    const double log_z_pm = model.log_evidence(data);
    std::size_t next_snapshot = 0;
    if (n == 0 || depth == 0) {
      // No corrections anywhere: one infinite segment, empty trees.
      if (obs) {
        const std::vector<double> zero(n_h, 0.0);
        std::vector<std::vector<std::int32_t>> counts(static_cast<std::size_t>(depth) + 1);
        for (int j = 0; j <= depth; ++j) {
          counts[static_cast<std::size_t>(j)].assign(1u << j, 0);
          if (n > 0) counts[static_cast<std::size_t>(j)].back() = static_cast<std::int32_t>(n);
        }
        for (; next_snapshot < obs->snapshot_at.size(); ++next_snapshot) {
          if (obs->on_snapshot) obs->on_snapshot(next_snapshot, counts);
        }
        if (obs->on_segment) {
          obs->on_segment(-std::numeric_limits<double>::infinity(),
                          std::numeric_limits<double>::infinity(), zero);
        }
      }
      return std::vector<double>(n_h, log_z_pm);
    }

    const double sigma = std::sqrt(model.obs_var());
    const GaussianPosterior post = model.posterior(data);
    const double sd = std::sqrt(post.var);

    const int leaves = 1 << depth;
    std::vector<double> zq(static_cast<std::size_t>(leaves));
    for (int k = 1; k < leaves; ++k) {
      zq[static_cast<std::size_t>(k)] =
          sigma * normal_quantile(static_cast<double>(k) / static_cast<double>(leaves));
    }

    struct Event {
      double theta;
      std::int32_t k;
    };
    std::vector<Event> events;
    events.reserve(n * static_cast<std::size_t>(leaves - 1));
    for (std::size_t i = 0; i < n; ++i) {
      const double x = data.scalar(i);
      for (int k = 1; k < leaves; ++k) {
        events.push_back({x - zq[static_cast<std::size_t>(k)], k});
      }
    }
    std::sort(events.begin(), events.end(),
              [](const Event& a, const Event& b) { return a.theta < b.theta; });

    // Ratio tables: lt[h][j][t] = log(alpha_j + t), ls[h][j][s] = log(2 alpha_j + s).
    const std::size_t tsize = n + 1;
    std::vector<double> lt(n_h * static_cast<std::size_t>(depth) * tsize);
    std::vector<double> ls(n_h * static_cast<std::size_t>(depth) * tsize);
    for (std::size_t hi = 0; hi < n_h; ++hi) {
      for (int j = 1; j <= depth; ++j) {
        const double alpha = level_alpha(cfg, hs[hi], j);
        double* lt_row = lt.data() + (hi * depth + (j - 1)) * tsize;
        double* ls_row = ls.data() + (hi * depth + (j - 1)) * tsize;
        for (std::size_t t = 0; t < tsize; ++t) {
          lt_row[t] = std::log(alpha + static_cast<double>(t));
          ls_row[t] = std::log(2.0 * alpha + static_cast<double>(t));
        }
      }
    }

    // Counts per level; theta below every breakpoint puts all mass in the
    // rightmost cells.
    std::vector<std::vector<std::int32_t>> counts(static_cast<std::size_t>(depth) + 1);
    for (int j = 0; j <= depth; ++j) {
      counts[static_cast<std::size_t>(j)].assign(1u << j, 0);
      counts[static_cast<std::size_t>(j)][(1u << j) - 1] = static_cast<std::int32_t>(n);
    }

    // corr at the initial state: a single occupied right spine.
    std::vector<double> corr(n_h);
    for (std::size_t hi = 0; hi < n_h; ++hi) {
      double c = static_cast<double>(n) * depth * kLog2;
      for (int j = 1; j <= depth; ++j) {
        const double alpha = level_alpha(cfg, hs[hi], j);
        c += log_beta(alpha, alpha + static_cast<double>(n)) - log_beta(alpha, alpha);
      }
      corr[hi] = c;
    }

    std::vector<LogSumAccumulator> acc(n_h);
    double z_prev = -std::numeric_limits<double>::infinity();
    double theta_prev = -std::numeric_limits<double>::infinity();

    auto flush_segment = [&](double theta_now, double z_now) {
      const double lm = log_normal_mass(z_prev, z_now);
      if (lm != -std::numeric_limits<double>::infinity()) {
        for (std::size_t hi = 0; hi < n_h; ++hi) acc[hi].add(corr[hi] + lm);
      }
      if (obs && obs->on_segment) {
        obs->on_segment(theta_prev, theta_now, std::span<const double>(corr.data(), n_h));
      }
      z_prev = z_now;
    };

    for (const Event& e : events) {
      if (obs) {
        while (next_snapshot < obs->snapshot_at.size() &&
               obs->snapshot_at[next_snapshot] < e.theta) {
          if (obs->on_snapshot) obs->on_snapshot(next_snapshot, counts);
          ++next_snapshot;
        }
      }
      if (e.theta > theta_prev) {
        flush_segment(e.theta, (e.theta - post.mean) / sd);
        theta_prev = e.theta;
      }
      // Moving observation: at level j the occupied cell k >> (depth - j)
      // hands one count to its left neighbor.
      const int tz = std::countr_zero(static_cast<unsigned>(e.k));
      const int j0 = depth - tz;
      for (int j = j0; j <= depth; ++j) {
        const int cr = e.k >> (depth - j);
        const int cl = cr - 1;
        auto& lvl = counts[static_cast<std::size_t>(j)];
        if (j == j0) {
          // Siblings: one node's split changes, totals stay.
          const std::int32_t n_l = lvl[static_cast<std::size_t>(cl)];
          const std::int32_t n_r = lvl[static_cast<std::size_t>(cr)];
          for (std::size_t hi = 0; hi < n_h; ++hi) {
            const double* lt_row = lt.data() + (hi * depth + (j - 1)) * tsize;
            corr[hi] += lt_row[n_l] - lt_row[n_r - 1];
          }
        } else {
          // Distinct parents: the right one loses its left child count, the
          // left one gains on its right child.
          const int pr = cr >> 1;
          const int pl = cl >> 1;
          const std::int32_t r_l = lvl[static_cast<std::size_t>(2 * pr)];
          const std::int32_t r_r = lvl[static_cast<std::size_t>(2 * pr + 1)];
          const std::int32_t l_l = lvl[static_cast<std::size_t>(2 * pl)];
          const std::int32_t l_r = lvl[static_cast<std::size_t>(2 * pl + 1)];
          for (std::size_t hi = 0; hi < n_h; ++hi) {
            const double* lt_row = lt.data() + (hi * depth + (j - 1)) * tsize;
            const double* ls_row = ls.data() + (hi * depth + (j - 1)) * tsize;
            corr[hi] += ls_row[r_l + r_r - 1] - lt_row[r_l - 1];  // loser
            corr[hi] += lt_row[l_r] - ls_row[l_l + l_r];          // gainer
          }
        }
        lvl[static_cast<std::size_t>(cr)] -= 1;
        lvl[static_cast<std::size_t>(cl)] += 1;
      }
    }
    if (obs) {
      for (; next_snapshot < obs->snapshot_at.size(); ++next_snapshot) {
        if (obs->on_snapshot) obs->on_snapshot(next_snapshot, counts);
      }
    }
    flush_segment(std::numeric_limits<double>::infinity(),
                  std::numeric_limits<double>::infinity());

    std::vector<double> out(n_h);
    for (std::size_t hi = 0; hi < n_h; ++hi) out[hi] = log_z_pm + acc[hi].value();
    return out;
  }
};

}  // namespace

double pt_evidence_given_h(const Dataset& data, const ConjugateGaussianModel& model, double h,
                           const PolyaTreeConfig& cfg) {
  check_pt_inputs(data, h);
  cfg.validate();
  const std::vector<double> hs{h};
  return EvidenceSweep{data, model, hs, cfg, cfg.depth}.run()[0];
}

double pt_perturbation_evidence(const Dataset& data, const ConjugateGaussianModel& model,
                                const PolyaTreeConfig& cfg) {
  if (data.dim() != 1) throw std::invalid_argument("polya tree: requires 1-dimensional data");
  const auto rule = cfg.resolve_h_rule();
  std::vector<double> hs(rule.size());
  for (std::size_t i = 0; i < rule.size(); ++i) hs[i] = rule[i].first;
  const std::vector<double> per_h = EvidenceSweep{data, model, hs, cfg, cfg.depth}.run();
  LogSumAccumulator acc;
  for (std::size_t i = 0; i < rule.size(); ++i) acc.add(std::log(rule[i].second) + per_h[i]);
  return acc.value();
}

double pt_log_bayes_factor(const Dataset& data, const ConjugateGaussianModel& model, double eta,
                           const PolyaTreeConfig& cfg) {
  if (!(eta > 0.0 && eta < 1.0)) throw std::invalid_argument("eta must lie in (0, 1)");
  const double log_pm = model.log_evidence(data);
  const double log_pert = pt_perturbation_evidence(data, model, cfg);
  return log_pm - log_pert + std::log(eta / (1.0 - eta));
}

double pt_exact_mixing_weight(const Dataset& data, const ConjugateGaussianModel& model, double eta,
                              const PolyaTreeConfig& cfg) {
  if (data.empty()) {
    if (!(eta > 0.0 && eta < 1.0)) throw std::invalid_argument("eta must lie in (0, 1)");
    return eta;
  }
  const double log_bf = pt_log_bayes_factor(data, model, eta, cfg);
  // eta_n = BF / (1 + BF)
  if (log_bf > 0.0) return 1.0 / (1.0 + std::exp(-log_bf));
  const double bf = std::exp(log_bf);
  return bf / (1.0 + bf);
}

PolyaTreePredictive::PolyaTreePredictive(const Dataset& data, const ConjugateGaussianModel& model,
                                         const PolyaTreeConfig& cfg) {
  if (data.dim() != 1) throw std::invalid_argument("polya tree: requires 1-dimensional data");
  cfg.validate();
  sigma_ = std::sqrt(model.obs_var());
  depth_ = cfg.depth;
  leaves_ = 1 << depth_;
  zq_.resize(static_cast<std::size_t>(leaves_));
  for (int k = 1; k < leaves_; ++k) {
    zq_[static_cast<std::size_t>(k)] = normal_quantile(static_cast<double>(k) / leaves_);
  }
  const auto h_rule = cfg.resolve_h_rule();
  const std::size_t n_h = h_rule.size();
  std::vector<double> hs(n_h);
  for (std::size_t i = 0; i < n_h; ++i) hs[i] = h_rule[i].first;

  const GaussianPosterior post = model.posterior(data);
  post_mean_ = post.mean;
  post_var_ = post.var;
  const double sd = std::sqrt(post.var);

  // Atom boundaries: equal-posterior-mass cells of the conjugate posterior,
  // padded with a uniform cover of the data range where the corrections can
  // push mass away from the Gaussian bulk.
  const int quantile_cells = 8 * cfg.theta_nodes;
  std::vector<double> bounds;
  for (int k = 1; k < quantile_cells; ++k) {
    bounds.push_back(post.mean +
                     sd * normal_quantile(static_cast<double>(k) / quantile_cells));
  }
  double lo = post.mean - 9.0 * sd;
  double hi = post.mean + 9.0 * sd;
  if (data.size() > 0) {
    lo = std::min(lo, data.points().minCoeff() - 6.0 * sigma_);
    hi = std::max(hi, data.points().maxCoeff() + 6.0 * sigma_);
  }
  const int cover_cells = 6 * cfg.theta_nodes;
  for (int k = 0; k <= cover_cells; ++k) {
    bounds.push_back(lo + (hi - lo) * k / cover_cells);
  }
  std::sort(bounds.begin(), bounds.end());
  bounds.erase(std::unique(bounds.begin(), bounds.end()), bounds.end());
  bounds_ = bounds;
  const std::size_t n_atoms = bounds_.size() + 1;

  rep_.resize(n_atoms);
  for (std::size_t a = 0; a < n_atoms; ++a) {
    if (a == 0) {
      rep_[a] = bounds_.front() - 1.0;
    } else if (a == n_atoms - 1) {
      rep_[a] = bounds_.back() + 1.0;
    } else {
      rep_[a] = 0.5 * (bounds_[a - 1] + bounds_[a]);
    }
  }

  // Per-atom, per-h mass accumulators and count snapshots at the reps.
  std::vector<LogSumAccumulator> mass(n_atoms * n_h);
  std::vector<std::vector<std::vector<std::int32_t>>> snaps(n_atoms);
  std::size_t cursor = 0;  // atom currently under the sweep

  SweepObserver obs;
  obs.snapshot_at = rep_;
  obs.on_snapshot = [&](std::size_t index, const std::vector<std::vector<std::int32_t>>& counts) {
    snaps[index] = counts;
  };
  obs.on_segment = [&](double theta_lo, double theta_hi, std::span<const double> corr) {
    // Split the segment across atom boundaries and bank the Gaussian mass.
    while (cursor > 0 && theta_lo < bounds_[cursor - 1]) --cursor;  // defensive
    std::size_t a = cursor;
    double left = theta_lo;
    while (true) {
      const double right = (a < bounds_.size()) ? std::min(theta_hi, bounds_[a]) : theta_hi;
      if (right > left) {
        const double lm = log_normal_mass((left - post.mean) / sd, (right - post.mean) / sd);
        if (lm != -std::numeric_limits<double>::infinity()) {
          for (std::size_t hi_i = 0; hi_i < n_h; ++hi_i) {
            mass[a * n_h + hi_i].add(corr[hi_i] + lm);
          }
        }
      }
      if (a >= bounds_.size() || theta_hi <= bounds_[a]) break;
      left = bounds_[a];
      ++a;
    }
    cursor = a;
  };

  EvidenceSweep{data, model, hs, cfg, depth_}.run(&obs);

  // Collapse the h mixture: table_[a][leaf] = sum_h w_ah * mult_leaf(a, h),
  // scaled per atom so the linear entries stay representable.
  LogSumAccumulator norm_acc;
  for (std::size_t a = 0; a < n_atoms; ++a) {
    for (std::size_t hi_i = 0; hi_i < n_h; ++hi_i) {
      norm_acc.add(std::log(h_rule[hi_i].second) + mass[a * n_h + hi_i].value());
    }
  }
  const double log_norm = norm_acc.value();

  log_scale_.assign(n_atoms, -std::numeric_limits<double>::infinity());
  table_.assign(n_atoms * static_cast<std::size_t>(leaves_), 0.0);
  std::vector<double> mult(static_cast<std::size_t>(leaves_));
  std::vector<double> prev, cur;
  for (std::size_t a = 0; a < n_atoms; ++a) {
    const double base_mass =
        log_normal_mass(a == 0 ? -std::numeric_limits<double>::infinity()
                               : (bounds_[a - 1] - post.mean) / sd,
                        a == bounds_.size() ? std::numeric_limits<double>::infinity()
                                            : (bounds_[a] - post.mean) / sd);
    double row_max = -std::numeric_limits<double>::infinity();
    std::vector<double> lw(n_h);
    for (std::size_t hi_i = 0; hi_i < n_h; ++hi_i) {
      lw[hi_i] = std::log(h_rule[hi_i].second) + mass[a * n_h + hi_i].value() - log_norm - base_mass;
      row_max = std::max(row_max, lw[hi_i]);
    }
    log_scale_[a] = row_max;
    if (row_max == -std::numeric_limits<double>::infinity()) continue;
    double* row = table_.data() + a * static_cast<std::size_t>(leaves_);
    for (std::size_t hi_i = 0; hi_i < n_h; ++hi_i) {
      const double w = std::exp(lw[hi_i] - row_max);
      if (w <= 0.0) continue;
      // Leaf multipliers under this (snapshot counts, h).
      const auto& counts = snaps[a];
      prev.assign(1, 1.0);
      for (int j = 1; j <= depth_; ++j) {
        const double alpha = level_alpha(cfg, hs[hi_i], j);
        const auto& child = counts[static_cast<std::size_t>(j)];
        const auto& parent = counts[static_cast<std::size_t>(j - 1)];
        cur.resize(1u << j);
        for (std::size_t c = 0; c < cur.size(); ++c) {
          cur[c] = prev[c >> 1] * 2.0 * (alpha + child[c]) /
                   (2.0 * alpha + parent[c >> 1]);
        }
        prev.swap(cur);
      }
      for (int l = 0; l < leaves_; ++l) row[l] += w * prev[static_cast<std::size_t>(l)];
    }
  }
}

double PolyaTreePredictive::logpdf(double x) const {
  const std::size_t n_atoms = rep_.size();
  const double inf = std::numeric_limits<double>::infinity();
  // Convolution pieces: N(x; m, v + sigma^2) times window masses of
  // N(theta; m'(x), v') with v' = v sigma^2 / (v + sigma^2).
  const double s2 = sigma_ * sigma_;
  const double vbar = post_var_ * s2 / (post_var_ + s2);
  const double mbar = (post_mean_ * s2 + x * post_var_) / (post_var_ + s2);
  const double sdbar = std::sqrt(vbar);
  const double log_front = normal_logpdf(x, post_mean_, post_var_ + s2);

  // Scale pass: atom-level magnitudes bound every piece below.
  double best = -inf;
  for (std::size_t a = 0; a < n_atoms; ++a) {
    if (log_scale_[a] == -inf) continue;
    const double za = a == 0 ? -inf : (bounds_[a - 1] - mbar) / sdbar;
    const double zb = a == bounds_.size() ? inf : (bounds_[a] - mbar) / sdbar;
    best = std::max(best, log_scale_[a] + log_normal_mass(za, zb));
  }
  if (best == -inf) return -inf;

  // Merge-walk over atom boundaries and the leaf windows of x. As theta
  // rises, u = Phi((x - theta)/sigma) falls, so the leaf index descends from
  // the last cell to the first; window ell covers
  // theta in [x - sigma z_{ell+1}, x - sigma z_ell).
  const auto window_lo = [&](int ell) {
    return ell + 1 >= leaves_ ? -inf : x - sigma_ * zq_[static_cast<std::size_t>(ell + 1)];
  };
  const auto window_hi = [&](int ell) {
    return ell <= 0 ? inf : x - sigma_ * zq_[static_cast<std::size_t>(ell)];
  };

  double acc = 0.0;
  std::size_t a = 0;
  int ell = leaves_ - 1;
  double theta = -inf;
  double z_lo = -inf;
  while (true) {
    const double atom_hi = a == bounds_.size() ? inf : bounds_[a];
    const double w_hi = window_hi(ell);
    const double next = std::min(atom_hi, w_hi);
    if (next > theta && log_scale_[a] != -inf) {
      const double z_hi = next == inf ? inf : (next - mbar) / sdbar;
      const double lm = log_normal_mass(z_lo, z_hi);
      if (lm != -inf && log_scale_[a] + lm > best - 70.0) {
        acc += std::exp(log_scale_[a] + lm - best) *
               table_[a * static_cast<std::size_t>(leaves_) + static_cast<std::size_t>(ell)];
      }
      z_lo = z_hi;
    } else if (next > theta) {
      z_lo = next == inf ? inf : (next - mbar) / sdbar;
    }
    theta = next;
    if (theta == inf) break;
    if (atom_hi <= w_hi && a < bounds_.size()) ++a;
    if (w_hi <= atom_hi && ell > 0) --ell;
  }
  if (acc <= 0.0) return -inf;
  return log_front + best + std::log(acc);
}

double pt_posterior_predictive_logpdf(const Dataset& data, const ConjugateGaussianModel& model,
                                      const PolyaTreeConfig& cfg, double x) {
  return PolyaTreePredictive(data, model, cfg).logpdf(x);
}

double npp_predictive_logpdf(const Dataset& data, const ConjugateGaussianModel& model,
                             const PolyaTreeConfig& cfg, double eta, double x) {
  const double eta_n = pt_exact_mixing_weight(data, model, eta, cfg);
  const double log_pm = gaussian_predictive_logpdf(model.posterior(data), x, model.obs_var());
  const double log_pt = pt_posterior_predictive_logpdf(data, model, cfg, x);
  LogSumAccumulator acc;
  if (eta_n > 0.0) acc.add(std::log(eta_n) + log_pm);
  if (eta_n < 1.0) acc.add(std::log1p(-eta_n) + log_pt);
  return acc.value();
}

double kl_to_truth(const Truth& truth, const std::function<double(double)>& predictive_logpdf,
                   std::size_t n_holdout, RngStream& rng) {
  if (n_holdout == 0) throw std::invalid_argument("kl_to_truth: n_holdout must be >= 1");
  const Dataset z = truth.sample(n_holdout, rng);
  double acc = 0.0;
  for (std::size_t i = 0; i < n_holdout; ++i) {
    const double zi = z.scalar(i);
    const double lp = predictive_logpdf(zi);
    if (!std::isfinite(lp)) {
      throw std::runtime_error("kl_to_truth: predictive log density not finite at z = " +
                               std::to_string(zi));
    }
    acc += truth.log_density(zi) - lp;
  }
  return acc / static_cast<double>(n_holdout);
}

}  // namespace npp
