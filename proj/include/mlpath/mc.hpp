#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "mlpath/drift.hpp"
#include "mlpath/grid.hpp"
#include "mlpath/numeric.hpp"
#include "mlpath/optimize.hpp"
#include "mlpath/rng.hpp"
#include "mlpath/tilt.hpp"

namespace mlpath {

// ---------------------------------------------------------------------------
// SDE ensembles (Euler-Maruyama).
// ---------------------------------------------------------------------------

enum class SdeScheme { euler_maruyama };

// Paths are materialized only up to this cap; the hit-counting ops stream by
// regenerating paths from their per-index RNG streams, which is bit-identical
// and keeps 10^7-path runs in constant memory.
inline constexpr std::int64_t kEnsembleMaterializeCap = 100000;

struct Ensemble {
  DriftModel drift;
  double eps;
  TimeGrid grid;
  double x0;
  std::uint64_t seed;
  std::int64_t count;
  SdeScheme scheme;
  std::vector<DiscretePath> paths;  // empty beyond the materialize cap
  bool materialized;
};

namespace detail {

// X_{j+1} = X_j + b(X_j) dt + eps sqrt(dt) xi_j, stream per sample index.
inline void generate_path(const DriftModel& drift, double eps, const TimeGrid& grid,
                          double x0, std::uint64_t seed, std::int64_t index,
                          std::vector<double>& out) {
  const double dt = grid.dt();
  const double step_sd = eps * std::sqrt(dt);
  const int n = grid.n_intervals();
  out.resize(static_cast<std::size_t>(n) + 1);
  StreamRng rng(seed, static_cast<std::uint64_t>(index));
  double x = x0;
  out[0] = x;
  for (int j = 0; j < n; ++j) {
    x += drift.b(x) * dt + step_sd * rng.next_normal();
    out[static_cast<std::size_t>(j) + 1] = x;
  }
}

}  // namespace detail

inline Ensemble simulate(const DriftModel& drift, double eps, const TimeGrid& grid,
                         std::int64_t count, std::uint64_t seed, double x0 = 0.0,
                         int threads = 0) {
  if (count < 1) throw std::invalid_argument("simulate: count must be >= 1");
  if (!(eps >= 0.0) || !std::isfinite(eps))
    throw std::invalid_argument("simulate: eps must be >= 0");
  Ensemble e{drift, eps,   grid, x0, seed, count, SdeScheme::euler_maruyama,
             {},    count <= kEnsembleMaterializeCap};
  if (e.materialized) {
    e.paths.assign(static_cast<std::size_t>(count), constant_path(grid, x0));
    parallel_for(
        count,
        [&](std::int64_t i) {
          detail::generate_path(drift, eps, grid, x0, seed, i,
                                e.paths[static_cast<std::size_t>(i)].values);
        },
        threads);
  }
  return e;
}

// sample_id, t, value rows for external tooling.
inline void write_ensemble_csv(const Ensemble& e, std::ostream& os,
                               std::int64_t max_samples = kEnsembleMaterializeCap) {
  os << "sample_id,t,value\n";
  const std::int64_t limit = std::min(e.count, max_samples);
  std::vector<double> buf;
  for (std::int64_t i = 0; i < limit; ++i) {
    const std::vector<double>& v =
        e.materialized ? e.paths[static_cast<std::size_t>(i)].values
                       : (detail::generate_path(e.drift, e.eps, e.grid, e.x0, e.seed, i, buf), buf);
    for (int j = 0; j < e.grid.n_nodes(); ++j)
      os << i << ',' << format_double(e.grid.node(j)) << ','
         << format_double(v[static_cast<std::size_t>(j)]) << '\n';
  }
}

// ---------------------------------------------------------------------------
// Small-ball probability ratios (the OM definition, at fixed delta).
// ---------------------------------------------------------------------------

struct RatioEstimate {
  double delta = 0.0;
  double point_estimate = 0.0;
  double ci_low = 0.0;   // 95% delta-method interval on the log ratio
  double ci_high = 0.0;
  std::int64_t hits1 = 0;
  std::int64_t hits2 = 0;
  std::int64_t hits_both = 0;
  std::int64_t count = 0;
  bool flag_low_hits = false;   // hits2 below the 100-hit floor
  bool flag_undefined = false;  // empty numerator or denominator
};

namespace detail {

inline RatioEstimate ratio_from_counts(double delta, std::int64_t h1, std::int64_t h2,
                                       std::int64_t both, std::int64_t n) {
  RatioEstimate r;
  r.delta = delta;
  r.hits1 = h1;
  r.hits2 = h2;
  r.hits_both = both;
  r.count = n;
  r.flag_low_hits = h2 < 100;
  if (h1 == 0 || h2 == 0) {
    r.flag_undefined = true;
    r.point_estimate = h2 > 0 ? 0.0 : kInf;
    r.ci_low = 0.0;
    r.ci_high = kInf;
    return r;
  }
  const double nd = static_cast<double>(n);
  const double p1 = static_cast<double>(h1) / nd;
  const double p2 = static_cast<double>(h2) / nd;
  const double p12 = static_cast<double>(both) / nd;
  r.point_estimate = p1 / p2;
  // var log(p1^/p2^) by the delta method, with the covariance of the
  // indicator counts (the hit sets overlap when the centers are close).
  double var = (1.0 - p1) / (nd * p1) + (1.0 - p2) / (nd * p2) -
               2.0 * (p12 - p1 * p2) / (nd * p1 * p2);
  if (var < 0.0) var = 0.0;
  const double half = 1.959963984540054 * std::sqrt(var);
  r.ci_low = r.point_estimate * std::exp(-half);
  r.ci_high = r.point_estimate * std::exp(half);
  return r;
}

}  // namespace detail

// One pass over the ensemble counting sup-norm ball hits around z1 and z2
// for every delta in the ladder. Streams by regeneration; chunk counts are
// combined in chunk order, so results do not depend on the thread count.
inline std::vector<RatioEstimate> small_ball_ladder(const Ensemble& e,
                                                    const DiscretePath& z1,
                                                    const DiscretePath& z2,
                                                    const std::vector<double>& deltas,
                                                    int threads = 0) {
  if (z1.grid != e.grid || z2.grid != e.grid)
    throw std::invalid_argument("small_ball_ladder: centers on a different grid");
  if (deltas.empty()) throw std::invalid_argument("small_ball_ladder: empty ladder");
  for (double d : deltas)
    if (!(d > 0.0)) throw std::invalid_argument("small_ball_ladder: delta must be > 0");

  struct Counts {
    std::vector<std::int64_t> h1, h2, both;
  };
  const std::size_t nd = deltas.size();
  const auto chunks = run_chunked<Counts>(
      e.count,
      [&](int, std::int64_t begin, std::int64_t end) {
        Counts c{std::vector<std::int64_t>(nd, 0), std::vector<std::int64_t>(nd, 0),
                 std::vector<std::int64_t>(nd, 0)};
        std::vector<double> buf;
        for (std::int64_t i = begin; i < end; ++i) {
          const std::vector<double>& v =
              e.materialized
                  ? e.paths[static_cast<std::size_t>(i)].values
                  : (detail::generate_path(e.drift, e.eps, e.grid, e.x0, e.seed, i, buf),
                     buf);
          double dev1 = 0.0, dev2 = 0.0;
          for (std::size_t j = 0; j < v.size(); ++j) {
            dev1 = std::max(dev1, std::fabs(v[j] - z1.values[j]));
            dev2 = std::max(dev2, std::fabs(v[j] - z2.values[j]));
          }
          for (std::size_t k = 0; k < nd; ++k) {
            const bool in1 = dev1 <= deltas[k];
            const bool in2 = dev2 <= deltas[k];
            c.h1[k] += in1;
            c.h2[k] += in2;
            c.both[k] += in1 && in2;
          }
        }
        return c;
      },
      threads);

  std::vector<RatioEstimate> out;
  out.reserve(nd);
  for (std::size_t k = 0; k < nd; ++k) {
    std::int64_t h1 = 0, h2 = 0, both = 0;
    for (const auto& c : chunks) {
      h1 += c.h1[k];
      h2 += c.h2[k];
      both += c.both[k];
    }
    out.push_back(detail::ratio_from_counts(deltas[k], h1, h2, both, e.count));
  }
  return out;
}

inline RatioEstimate small_ball_ratio(const Ensemble& e, const DiscretePath& z1,
                                      const DiscretePath& z2, double delta,
                                      int threads = 0) {
  return small_ball_ladder(e, z1, z2, {delta}, threads).front();
}

// Default ladder {0.8, 0.6, 0.4, 0.3} x path scale.
inline std::vector<double> default_delta_ladder(const DiscretePath& z1,
                                                const DiscretePath& z2, double eps) {
  const double scale = std::max({sup_norm(z1.values), sup_norm(z2.values),
                                 eps * std::sqrt(z1.grid.horizon())});
  return {0.8 * scale, 0.6 * scale, 0.4 * scale, 0.3 * scale};
}

// ---------------------------------------------------------------------------
// LDP decay rates: eps^2 log p(eps) against events.
// ---------------------------------------------------------------------------

using PathEvent = std::function<bool(const TimeGrid&, const std::vector<double>&)>;

inline PathEvent event_terminal_at_least(double level) {
  return [level](const TimeGrid&, const std::vector<double>& v) {
    return v.back() >= level;
  };
}

inline PathEvent event_sup_at_least(double level) {
  return [level](const TimeGrid&, const std::vector<double>& v) {
    for (double x : v)
      if (x >= level) return true;
    return false;
  };
}

inline PathEvent event_whole_space() {
  return [](const TimeGrid&, const std::vector<double>&) { return true; };
}

struct RateEntry {
  double eps = 0.0;
  std::int64_t hits = 0;
  double p_hat = 0.0;
  double scaled_log = 0.0;  // eps^2 log p_hat, when defined
  double se = 0.0;          // delta-method standard error of scaled_log
  bool defined = false;     // p_hat > 0
};

struct RateEstimate {
  std::vector<RateEntry> entries;
  double extrapolated = 0.0;
  double extrapolated_se = 0.0;
  bool extrapolation_defined = false;
};

namespace detail {

// Extrapolation in the basis {1, eps^2, eps^2 ln eps} on the smallest defined
// entries: the constant term estimates the limit. Gaussian tails carry an
// eps^2 ln eps prefactor correction, which plain Richardson in eps^2 misses.
inline void extrapolate_rate(RateEstimate& est) {
  std::vector<const RateEntry*> usable;
  for (const auto& e : est.entries)
    if (e.defined) usable.push_back(&e);
  const std::size_t k = std::min<std::size_t>(3, usable.size());
  if (k == 0) return;
  // Smallest eps entries are at the back (the eps list is decreasing).
  std::vector<const RateEntry*> pts(usable.end() - static_cast<std::ptrdiff_t>(k),
                                    usable.end());
  const std::size_t m = k;
  std::vector<std::vector<double>> M(m, std::vector<double>(m, 0.0));
  for (std::size_t i = 0; i < m; ++i) {
    const double x = pts[i]->eps * pts[i]->eps;
    M[i][0] = 1.0;
    if (m > 1) M[i][1] = x;
    if (m > 2) M[i][2] = x * std::log(pts[i]->eps);
  }
  // Solve M^T w = e_0; then limit = sum w_i y_i and se = sqrt(sum (w_i se_i)^2).
  std::vector<std::vector<double>> A(m, std::vector<double>(m + 1, 0.0));
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < m; ++j) A[i][j] = M[j][i];
    A[i][m] = i == 0 ? 1.0 : 0.0;
  }
  for (std::size_t col = 0; col < m; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < m; ++r)
      if (std::fabs(A[r][col]) > std::fabs(A[piv][col])) piv = r;
    if (std::fabs(A[piv][col]) < 1e-300) return;  // degenerate ladder
    std::swap(A[col], A[piv]);
    for (std::size_t r = 0; r < m; ++r) {
      if (r == col) continue;
      const double f = A[r][col] / A[col][col];
      for (std::size_t c = col; c <= m; ++c) A[r][c] -= f * A[col][c];
    }
  }
  double limit = 0.0, var = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double w = A[i][m] / A[i][i];
    limit += w * pts[i]->scaled_log;
    var += w * w * pts[i]->se * pts[i]->se;
  }
  est.extrapolated = limit;
  est.extrapolated_se = std::sqrt(var);
  est.extrapolation_defined = true;
}

}  // namespace detail

inline RateEstimate ldp_rate(const DriftModel& drift, const PathEvent& event,
                             const std::vector<double>& eps_list, std::int64_t count,
                             std::uint64_t seed, const TimeGrid& grid, double x0 = 0.0,
                             int threads = 0) {
  if (count < 1) throw std::invalid_argument("ldp_rate: count must be >= 1");
  {
    double prev = kInf;
    for (double e : eps_list) {
      if (!(e > 0.0) || !(e < prev))
        throw std::invalid_argument("ldp_rate: eps_list must decrease and stay positive");
      prev = e;
    }
  }
  RateEstimate est;
  for (std::size_t idx = 0; idx < eps_list.size(); ++idx) {
    const double eps = eps_list[idx];
    // Per-eps sub-seed so the ladder entries are independent.
    const std::uint64_t sub_seed = seed + 0x51ed2701u * static_cast<std::uint64_t>(idx + 1);
    const auto chunk_hits = run_chunked<std::int64_t>(
        count,
        [&](int, std::int64_t begin, std::int64_t end) {
          std::int64_t h = 0;
          std::vector<double> buf;
          for (std::int64_t i = begin; i < end; ++i) {
            detail::generate_path(drift, eps, grid, x0, sub_seed, i, buf);
            h += event(grid, buf) ? 1 : 0;
          }
          return h;
        },
        threads);
    std::int64_t hits = 0;
    for (std::int64_t h : chunk_hits) hits += h;
    RateEntry entry;
    entry.eps = eps;
    entry.hits = hits;
    entry.p_hat = static_cast<double>(hits) / static_cast<double>(count);
    if (hits > 0) {
      entry.defined = true;
      entry.scaled_log = eps * eps * std::log(entry.p_hat);
      entry.se = eps * eps *
                 std::sqrt((1.0 - entry.p_hat) /
                           (static_cast<double>(count) * entry.p_hat));
    }
    est.entries.push_back(entry);
  }
  detail::extrapolate_rate(est);
  return est;
}

// ---------------------------------------------------------------------------
// inf FW over simple path events, by pinned minimizations.
// ---------------------------------------------------------------------------

enum class EventShape { terminal_at_least, sup_at_least };

namespace detail {

inline double pinned_fw_value(const DriftModel& drift, const TimeGrid& grid,
                              double start, double stop, const MinimizeOptions& opts) {
  Constraints pins;
  pins.pin_start = start;
  pins.pin_end = stop;
  return minimize(fw_path_objective(drift, start), linear_path(grid, start, stop), pins,
                  opts)
      .value;
}

}  // namespace detail

// terminal_at_least: scans terminal levels y >= level (coarse grid + golden
// refinement of the best bracket). sup_at_least: minimizes the cost of
// reaching the level by each hitting node and rides the zero-cost flow
// afterwards.
inline double fw_infimum_over_event(const DriftModel& drift, EventShape shape,
                                    double level, const TimeGrid& grid,
                                    const Constraints& constraints = Constraints{},
                                    const MinimizeOptions& opts = MinimizeOptions{}) {
  const double start = constraints.pin_start.value_or(0.0);
  if (level <= start) return 0.0;  // the start already meets the level
  if (shape == EventShape::terminal_at_least) {
    const double span = 2.0 * std::max(1.0, std::fabs(level - start));
    const int coarse = 12;
    auto value_at = [&](double y) { return detail::pinned_fw_value(drift, grid, start, y, opts); };
    double best_y = level, best_v = kInf;
    for (int j = 0; j <= coarse; ++j) {
      const double y = level + span * j / coarse;
      const double v = value_at(y);
      if (v < best_v) {
        best_v = v;
        best_y = y;
      }
    }
    double lo = std::max(level, best_y - span / coarse);
    double hi = best_y + span / coarse;
    const double gr = 0.6180339887498949;
    double x1 = hi - gr * (hi - lo), x2 = lo + gr * (hi - lo);
    double f1 = value_at(x1), f2 = value_at(x2);
    for (int it = 0; it < 40 && hi - lo > 1e-7; ++it) {
      if (f1 <= f2) {
        hi = x2;
        x2 = x1;
        f2 = f1;
        x1 = hi - gr * (hi - lo);
        f1 = value_at(x1);
      } else {
        lo = x1;
        x1 = x2;
        f1 = f2;
        x2 = lo + gr * (hi - lo);
        f2 = value_at(x2);
      }
    }
    return std::min(best_v, std::min(f1, f2));
  }

  // sup_at_least: cost to hit `level` at node j, continuation along z' = b(z)
  // is free. Hitting nodes are scanned on a coarse subset, then the best
  // neighborhood is checked exactly.
  const int n = grid.n_intervals();
  auto hit_cost = [&](int j) {
    TimeGrid sub(grid.dt() * j, j);
    return detail::pinned_fw_value(drift, sub, start, level, opts);
  };
  const int stride = std::max(1, n / 32);
  double best = kInf;
  int best_j = n;
  for (int j = stride; j <= n; j += stride) {
    const double v = hit_cost(j);
    if (v < best) {
      best = v;
      best_j = j;
    }
  }
  if (n % stride != 0) {
    const double v = hit_cost(n);
    if (v < best) {
      best = v;
      best_j = n;
    }
  }
  for (int j = std::max(1, best_j - stride + 1); j <= std::min(n, best_j + stride - 1); ++j)
    best = std::min(best, hit_cost(j));
  return best;
}

// ---------------------------------------------------------------------------
// Girsanov reweighting check: mean of exp(log density) over mu_0^eps paths.
// ---------------------------------------------------------------------------

struct WeightMean {
  double mean = 0.0;
  double se = 0.0;
};

inline WeightMean girsanov_weight_mean(const DriftModel& drift, double eps,
                                       const TimeGrid& grid, std::int64_t count,
                                       std::uint64_t seed,
                                       StochasticScheme scheme = StochasticScheme::ito_left,
                                       int threads = 0) {
  if (count < 1) throw std::invalid_argument("girsanov_weight_mean: count must be >= 1");
  const DriftModel no_drift{[](double) { return 0.0; }, [](double) { return 0.0; },
                            [](double) { return 0.0; }, "zero"};
  struct Moments {
    double sum = 0.0, sumsq = 0.0;
  };
  const auto chunks = run_chunked<Moments>(
      count,
      [&](int, std::int64_t begin, std::int64_t end) {
        Moments m;
        KahanSum s, s2;
        std::vector<double> buf;
        for (std::int64_t i = begin; i < end; ++i) {
          detail::generate_path(no_drift, eps, grid, 0.0, seed, i, buf);
          const double w =
              std::exp(girsanov_log_density(drift, DiscretePath(grid, buf), eps, scheme));
          s.add(w);
          s2.add(w * w);
        }
        m.sum = s.value();
        m.sumsq = s2.value();
        return m;
      },
      threads);
  KahanSum sum, sumsq;
  for (const auto& m : chunks) {
    sum.add(m.sum);
    sumsq.add(m.sumsq);
  }
  const double nd = static_cast<double>(count);
  const double mean = sum.value() / nd;
  const double var = std::max(0.0, sumsq.value() / nd - mean * mean);
  return WeightMean{mean, std::sqrt(var / nd)};
}

}  // namespace mlpath
