#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "mlpath/drift.hpp"
#include "mlpath/grid.hpp"
#include "mlpath/optimize.hpp"
#include "mlpath/rng.hpp"
#include "mlpath/tilt.hpp"

namespace mlpath {

// ---------------------------------------------------------------------------
// eps sweep: OM modes along a decreasing eps ladder against the FW mode.
// ---------------------------------------------------------------------------

struct EpsSweepEntry {
  double eps;
  MinimizeResult result;  // value = OM_eps(mode); grad refers to eps^2 OM_eps
};

struct EpsSweepResult {
  std::vector<EpsSweepEntry> entries;
  MinimizeResult fw_mode;
  std::vector<double> distances;  // sup-norm distance of each OM mode to fw_mode
};

inline void require_strictly_decreasing_positive(const std::vector<double>& xs,
                                                 const char* what) {
  if (xs.empty()) throw std::invalid_argument(std::string(what) + ": empty list");
  double prev = kInf;
  for (double x : xs) {
    if (!(x > 0.0) || !(x < prev))
      throw std::invalid_argument(std::string(what) +
                                  ": must be strictly decreasing and positive");
    prev = x;
  }
}

// Computes the FW mode, then one OM mode per eps. Each eps warm-starts from
// the previous mode (the first from the FW mode), tracking one branch; the
// eps^2-scaled objective is minimized so tolerances are eps-uniform.
inline EpsSweepResult eps_sweep(const DriftModel& drift, const TimeGrid& grid,
                                const Constraints& constraints,
                                const std::vector<double>& eps_list,
                                const MinimizeOptions& opts = MinimizeOptions{}) {
  require_strictly_decreasing_positive(eps_list, "eps_sweep eps_list");
  const double start = constraints.pin_start.value_or(0.0);
  const double stop = constraints.pin_end.value_or(start);
  EpsSweepResult out{{},
                     minimize(fw_path_objective(drift, start),
                              linear_path(grid, start, stop), constraints, opts, "line"),
                     {}};
  DiscretePath warm = out.fw_mode.path;
  for (double eps : eps_list) {
    MinimizeResult r = minimize(om_scaled_path_objective(drift, eps, start), warm,
                                constraints, opts, "warm");
    warm = r.path;
    r.value = om_sde(drift, r.path, eps, start).value;
    out.distances.push_back(sup_distance(r.path, out.fw_mode.path));
    out.entries.push_back(EpsSweepEntry{eps, std::move(r)});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Gamma-convergence diagnostics: neighborhood infima over shrinking sup-norm
// balls, probed by a low-discrepancy point set.
// ---------------------------------------------------------------------------

using PathFunctional = std::function<double(const DiscretePath&)>;
using PathFunctionalFamily = std::function<PathFunctional(double /*eps*/)>;

struct GammaRadiusEstimate {
  double radius;
  std::vector<double> ball_inf;  // per eps: min over probes (center included)
  double liminf_estimate;        // min of ball_inf over the trailing half
  double limsup_estimate;        // max of ball_inf over the trailing half
  double slack;                  // max(0, reference - liminf_estimate)
};

struct GammaReport {
  std::vector<double> eps_list;
  std::vector<double> center_values;  // family(eps)(z)
  std::vector<GammaRadiusEstimate> radii;
  std::optional<double> limit_reference;
  double recovery_gap;  // |center value at the smallest eps - reference|
};

namespace detail {

// Kronecker (R_d) low-discrepancy directions in [-1,1]^dims: component j of
// probe k is 2 frac(1/2 + k g^{j+1}) - 1 where g is the inverse of the
// generalized golden ratio for this dimension count.
class KroneckerDirections {
 public:
  explicit KroneckerDirections(int dims) : alphas_(static_cast<std::size_t>(dims)) {
    double phi = 2.0;
    for (int it = 0; it < 64; ++it) phi = std::pow(1.0 + phi, 1.0 / (dims + 1));
    const double g = 1.0 / phi;
    double p = 1.0;
    for (int j = 0; j < dims; ++j) {
      p *= g;
      alphas_[static_cast<std::size_t>(j)] = p;
    }
  }
  double component(std::int64_t probe, int j) const {
    double v = 0.5 + static_cast<double>(probe + 1) * alphas_[static_cast<std::size_t>(j)];
    v -= std::floor(v);
    return 2.0 * v - 1.0;
  }

 private:
  std::vector<double> alphas_;
};

}  // namespace detail

// For each radius r, estimates inf over the ball B_r(z) of family(eps) per
// eps (perturbing interior nodes only, pinned ends stay put), then reads the
// liminf/limsup estimates off the trailing half of the eps ladder. With a
// reference value (the candidate limit at z), reports per-radius slack and
// the recovery gap of the constant sequence.
inline GammaReport gamma_diagnostic(const PathFunctionalFamily& family,
                                    const DiscretePath& z,
                                    const std::vector<double>& radii,
                                    const std::vector<double>& eps_list,
                                    int probes_per_radius = 256,
                                    std::optional<double> limit_reference = std::nullopt,
                                    int threads = 0) {
  require_strictly_decreasing_positive(radii, "gamma_diagnostic radii");
  require_strictly_decreasing_positive(eps_list, "gamma_diagnostic eps_list");
  if (probes_per_radius < 1)
    throw std::invalid_argument("gamma_diagnostic: need at least one probe");
  const int interior = z.grid.n_nodes() - 2;
  if (interior < 1)
    throw std::invalid_argument("gamma_diagnostic: grid has no interior nodes");
  const detail::KroneckerDirections dirs(interior);

  GammaReport report;
  report.eps_list = eps_list;
  report.limit_reference = limit_reference;
  report.radii.reserve(radii.size());

  std::vector<PathFunctional> fns;
  fns.reserve(eps_list.size());
  for (double eps : eps_list) fns.push_back(family(eps));
  for (std::size_t e = 0; e < eps_list.size(); ++e)
    report.center_values.push_back(fns[e](z));

  for (double r : radii) {
    GammaRadiusEstimate est;
    est.radius = r;
    for (std::size_t e = 0; e < eps_list.size(); ++e) {
      const auto& fn = fns[e];
      const auto chunk_mins = run_chunked<double>(
          probes_per_radius,
          [&](int, std::int64_t begin, std::int64_t end) {
            DiscretePath probe = z;
            double best = kInf;
            for (std::int64_t k = begin; k < end; ++k) {
              for (int j = 0; j < interior; ++j)
                probe.values[static_cast<std::size_t>(j + 1)] =
                    z.values[static_cast<std::size_t>(j + 1)] + r * dirs.component(k, j);
              best = std::min(best, fn(probe));
            }
            return best;
          },
          threads);
      double m = report.center_values[e];  // the center is always a probe
      for (double c : chunk_mins) m = std::min(m, c);
      est.ball_inf.push_back(m);
    }
    const std::size_t tail = (eps_list.size() + 1) / 2;
    double lo = kInf, hi = -kInf;
    for (std::size_t e = eps_list.size() - tail; e < eps_list.size(); ++e) {
      lo = std::min(lo, est.ball_inf[e]);
      hi = std::max(hi, est.ball_inf[e]);
    }
    est.liminf_estimate = lo;
    est.limsup_estimate = hi;
    est.slack = limit_reference ? std::max(0.0, *limit_reference - lo) : 0.0;
    report.radii.push_back(std::move(est));
  }
  report.recovery_gap =
      limit_reference ? std::fabs(report.center_values.back() - *limit_reference) : 0.0;
  return report;
}

// Canonical family for an SDE drift: eps -> eps^2 OM_eps.
inline PathFunctionalFamily om_family(const DriftModel& drift, double start = 0.0) {
  return [drift, start](double eps) -> PathFunctional {
    PathObjective obj = om_scaled_path_objective(drift, eps, start);
    return obj.value;
  };
}

// ---------------------------------------------------------------------------
// Stationarity and coercivity checks.
// ---------------------------------------------------------------------------

enum class ObjectiveKind { fw, om };

// Sup-norm over interior nodes of the discrete Euler-Lagrange residual, i.e.
// the nodal gradient of the discretized functional. For FW this approximates
// dt * (z'' - b(z) b'(z)) nodewise, so sampled continuum solutions score
// O(dt^2) and converged minimizers score <= their gradient tolerance.
inline double euler_lagrange_residual(const DriftModel& drift, const DiscretePath& z,
                                      ObjectiveKind kind, double eps = 1.0) {
  const double start = z.values.front();
  const PathObjective obj = kind == ObjectiveKind::fw
                                ? fw_path_objective(drift, start)
                                : om_path_objective(drift, eps, start);
  const std::vector<double> g = obj.gradient(z);
  double m = 0.0;
  for (std::size_t k = 1; k + 1 < g.size(); ++k) m = std::max(m, std::fabs(g[k]));
  return m;
}

// Heuristic sublevel-set boundedness probe: checks quadratic growth of the
// family along random unit sup-norm directions at distance span. Reports the
// worst growth ratio [f(z + span u) - f(z)] / span^2 over directions and eps.
// A positive min_growth suggests, but cannot certify, equicoercivity.
struct CoercivityReport {
  double min_growth = kInf;
  bool bounded_sublevels = false;
};

inline CoercivityReport equicoercivity_probe(const PathFunctionalFamily& family,
                                             const DiscretePath& z,
                                             const std::vector<double>& eps_list,
                                             int directions = 16, double span = 8.0,
                                             std::uint64_t seed = 20) {
  require_strictly_decreasing_positive(eps_list, "equicoercivity_probe eps_list");
  const int interior = z.grid.n_nodes() - 2;
  if (interior < 1 || directions < 1 || !(span > 0.0))
    throw std::invalid_argument("equicoercivity_probe: bad arguments");
  CoercivityReport rep;
  for (double eps : eps_list) {
    const PathFunctional fn = family(eps);
    const double f0 = fn(z);
    for (int d = 0; d < directions; ++d) {
      StreamRng rng(seed, static_cast<std::uint64_t>(d));
      DiscretePath probe = z;
      double scale = 0.0;
      std::vector<double> u(static_cast<std::size_t>(interior));
      for (int j = 0; j < interior; ++j) {
        u[static_cast<std::size_t>(j)] = 2.0 * rng.next_uniform() - 1.0;
        scale = std::max(scale, std::fabs(u[static_cast<std::size_t>(j)]));
      }
      for (int j = 0; j < interior; ++j)
        probe.values[static_cast<std::size_t>(j + 1)] += span * u[static_cast<std::size_t>(j)] / scale;
      rep.min_growth = std::min(rep.min_growth, (fn(probe) - f0) / (span * span));
    }
  }
  rep.bounded_sublevels = rep.min_growth > 0.0;
  return rep;
}

}  // namespace mlpath
