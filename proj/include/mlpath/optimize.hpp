#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "mlpath/grid.hpp"
#include "mlpath/numeric.hpp"
#include "mlpath/rng.hpp"

namespace mlpath {

// Endpoint pins. pin_start defaults to 0, the Cameron-Martin requirement;
// pin_end is engaged for transition-path problems.
struct Constraints {
  std::optional<double> pin_start = 0.0;
  std::optional<double> pin_end = std::nullopt;
};

struct MinimizeOptions {
  double tol = 1e-8;          // sup-norm of the nodal gradient
  long max_iter = 100000;     // accepted descent steps
  double initial_step = 1.0;
  double armijo_c = 1e-4;
  double dedup_radius = 1e-3;  // multi_start sup-norm dedup
  bool precondition = true;    // H^1 metric via a tridiagonal solve
  // Optional per-iteration observer: (iteration, objective, grad sup-norm).
  std::function<void(long, double, double)> observer;
};

struct MinimizeResult {
  DiscretePath path;
  double value = 0.0;
  double grad_norm = 0.0;
  long iterations = 0;
  bool converged = false;
  std::string start_label;
};

// Objective over paths. `gradient` returns all n+1 nodal partials; when it is
// empty a central finite difference over the free nodes is used instead.
struct PathObjective {
  std::function<double(const DiscretePath&)> value;
  std::function<std::vector<double>(const DiscretePath&)> gradient;
};

namespace detail {

// Solves the SPD tridiagonal system (diag, off) p = g in place (Thomas).
inline void tridiag_solve(std::vector<double>& diag, const std::vector<double>& off,
                          std::vector<double>& rhs) {
  const std::size_t m = diag.size();
  if (m == 0) return;
  for (std::size_t i = 1; i < m; ++i) {
    const double w = off[i - 1] / diag[i - 1];
    diag[i] -= w * off[i - 1];
    rhs[i] -= w * rhs[i - 1];
  }
  rhs[m - 1] /= diag[m - 1];
  for (std::size_t i = m - 1; i-- > 0;) rhs[i] = (rhs[i] - off[i] * rhs[i + 1]) / diag[i];
}

inline std::vector<double> fd_gradient(const std::function<double(const DiscretePath&)>& f,
                                       DiscretePath& z, const std::vector<char>& free_node) {
  std::vector<double> g(z.values.size(), 0.0);
  for (std::size_t k = 0; k < z.values.size(); ++k) {
    if (!free_node[k]) continue;
    const double saved = z.values[k];
    const double h = 1e-6 * std::max(1.0, std::fabs(saved));
    z.values[k] = saved + h;
    const double fp = f(z);
    z.values[k] = saved - h;
    const double fm = f(z);
    z.values[k] = saved;
    g[k] = (fp - fm) / (2.0 * h);
  }
  return g;
}

}  // namespace detail

// Gradient descent in the H^1 metric with Armijo backtracking. The descent
// direction is K^{-1} g where K is the free-node Laplacian (the Hessian of
// the half squared Cameron-Martin norm); convergence is judged on the plain
// nodal gradient sup-norm. The objective never increases across iterates.
inline MinimizeResult minimize(const PathObjective& objective, const DiscretePath& init,
                               const Constraints& constraints = Constraints{},
                               const MinimizeOptions& opts = MinimizeOptions{},
                               std::string start_label = "init") {
  const int n_nodes = init.grid.n_nodes();
  const double dt = init.grid.dt();

  if ((constraints.pin_start && !std::isfinite(*constraints.pin_start)) ||
      (constraints.pin_end && !std::isfinite(*constraints.pin_end)))
    throw std::invalid_argument("minimize: pinned values must be finite");
  if (constraints.pin_start && init.values.front() != *constraints.pin_start)
    throw std::domain_error("minimize: start violates pin_start");
  if (constraints.pin_end && init.values.back() != *constraints.pin_end)
    throw std::domain_error("minimize: start violates pin_end");

  const std::size_t node_count = static_cast<std::size_t>(n_nodes);
  std::vector<char> free_node(node_count, 1);
  if (constraints.pin_start) free_node[0] = 0;
  if (constraints.pin_end && node_count >= 2) free_node[node_count - 1] = 0;

  MinimizeResult res{init, 0.0, 0.0, 0, false, std::move(start_label)};
  DiscretePath& z = res.path;
  double f = objective.value(z);
  if (!std::isfinite(f))
    throw std::domain_error("minimize: objective not finite at the start");

  // Free-node index map for the tridiagonal preconditioner.
  std::vector<int> free_idx;
  free_idx.reserve(static_cast<std::size_t>(n_nodes));
  for (int k = 0; k < n_nodes; ++k)
    if (free_node[static_cast<std::size_t>(k)]) free_idx.push_back(k);
  const std::size_t m = free_idx.size();

  auto gradient = [&](DiscretePath& at) {
    return objective.gradient ? objective.gradient(at)
                              : detail::fd_gradient(objective.value, at, free_node);
  };

  DiscretePath trial = z;
  double step = opts.initial_step;
  std::vector<double> p(m), diag(m), off(m > 0 ? m - 1 : 0);

  for (;;) {
    std::vector<double> g = gradient(z);
    double gnorm = 0.0;
    for (int k : free_idx) gnorm = std::max(gnorm, std::fabs(g[static_cast<std::size_t>(k)]));
    res.value = f;
    res.grad_norm = gnorm;
    if (opts.observer) opts.observer(res.iterations, f, gnorm);
    if (gnorm <= opts.tol) {
      res.converged = true;
      return res;
    }
    if (res.iterations >= opts.max_iter || m == 0) return res;

    // Direction: p = K^{-1} g on the free nodes. A node touching a pinned or
    // absent neighbor keeps the interval's 1/dt diagonal contribution only.
    double slope;
    if (opts.precondition) {
      for (std::size_t i = 0; i < m; ++i) {
        const int k = free_idx[i];
        double d = 0.0;
        if (k > 0) d += 1.0 / dt;
        if (k < n_nodes - 1) d += 1.0 / dt;
        diag[i] = d > 0.0 ? d : 1.0;
        p[i] = g[static_cast<std::size_t>(k)];
        if (i + 1 < m)
          off[i] = (free_idx[i + 1] == k + 1) ? -1.0 / dt : 0.0;
      }
      detail::tridiag_solve(diag, off, p);
      slope = 0.0;
      for (std::size_t i = 0; i < m; ++i) slope += g[static_cast<std::size_t>(free_idx[i])] * p[i];
      if (!(slope > 0.0)) {  // fall back to the raw gradient direction
        slope = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
          p[i] = g[static_cast<std::size_t>(free_idx[i])];
          slope += p[i] * p[i];
        }
      }
    } else {
      for (std::size_t i = 0; i < m; ++i) p[i] = g[static_cast<std::size_t>(free_idx[i])];
      slope = 0.0;
      for (std::size_t i = 0; i < m; ++i) slope += p[i] * p[i];
    }

    // Armijo backtracking; step doubles after an accepted iterate.
    bool accepted = false;
    double alpha = step;
    for (int bt = 0; bt < 80; ++bt) {
      trial.values = z.values;
      for (std::size_t i = 0; i < m; ++i)
        trial.values[static_cast<std::size_t>(free_idx[i])] -= alpha * p[i];
      const double ft = objective.value(trial);
      if (std::isfinite(ft) && ft <= f - opts.armijo_c * alpha * slope) {
        z.values = trial.values;
        f = ft;
        step = alpha * 2.0;
        accepted = true;
        break;
      }
      alpha *= 0.5;
      if (alpha < 1e-18) break;
    }
    if (!accepted) return res;  // stalled below FP resolution; not converged
    ++res.iterations;
  }
}

// Runs minimize from every start, then deduplicates local minima closer than
// dedup_radius in sup-norm, keeping the lower value. Sorted by value with a
// lexicographic nodal tie-break so the output is deterministic.
inline std::vector<MinimizeResult> multi_start(const PathObjective& objective,
                                               const std::vector<DiscretePath>& starts,
                                               const Constraints& constraints = Constraints{},
                                               const MinimizeOptions& opts = MinimizeOptions{},
                                               int threads = 0) {
  if (starts.empty()) throw std::invalid_argument("multi_start: no starts");
  std::vector<MinimizeResult> runs;
  runs.reserve(starts.size());
  for (std::size_t s = 0; s < starts.size(); ++s)
    runs.push_back(MinimizeResult{starts[s], 0, 0, 0, false, "start_" + std::to_string(s)});
  parallel_for(
      static_cast<std::int64_t>(starts.size()),
      [&](std::int64_t s) {
        auto label = runs[static_cast<std::size_t>(s)].start_label;
        runs[static_cast<std::size_t>(s)] =
            minimize(objective, starts[static_cast<std::size_t>(s)], constraints, opts,
                     std::move(label));
      },
      threads);

  std::sort(runs.begin(), runs.end(), [](const MinimizeResult& a, const MinimizeResult& b) {
    if (a.value != b.value) return a.value < b.value;
    return a.path.values < b.path.values;
  });
  std::vector<MinimizeResult> kept;
  for (auto& r : runs) {
    bool duplicate = false;
    for (const auto& k : kept)
      if (sup_distance(r.path, k.path) <= opts.dedup_radius) {
        duplicate = true;
        break;
      }
    if (!duplicate) kept.push_back(std::move(r));
  }
  return kept;
}

// Plain vector minimizer (no grid, no pins) for sequence-space functionals;
// same Armijo scheme with an identity metric.
struct VectorObjective {
  std::function<double(const std::vector<double>&)> value;
  std::function<std::vector<double>(const std::vector<double>&)> gradient;  // optional
};

struct VectorMinimizeResult {
  std::vector<double> x;
  double value = 0.0;
  double grad_norm = 0.0;
  long iterations = 0;
  bool converged = false;
};

inline VectorMinimizeResult minimize_vector(const VectorObjective& objective,
                                            std::vector<double> init,
                                            const MinimizeOptions& opts = MinimizeOptions{}) {
  VectorMinimizeResult res{std::move(init), 0.0, 0.0, 0, false};
  auto& x = res.x;
  double f = objective.value(x);
  if (!std::isfinite(f))
    throw std::domain_error("minimize_vector: objective not finite at the start");
  auto gradient = [&](const std::vector<double>& at) {
    if (objective.gradient) return objective.gradient(at);
    std::vector<double> g(at.size());
    std::vector<double> probe = at;
    for (std::size_t k = 0; k < at.size(); ++k) {
      const double saved = probe[k];
      const double h = 1e-6 * std::max(1.0, std::fabs(saved));
      probe[k] = saved + h;
      const double fp = objective.value(probe);
      probe[k] = saved - h;
      const double fm = objective.value(probe);
      probe[k] = saved;
      g[k] = (fp - fm) / (2.0 * h);
    }
    return g;
  };

  std::vector<double> trial = x;
  double step = opts.initial_step;
  for (;;) {
    const std::vector<double> g = gradient(x);
    const double gnorm = sup_norm(g);
    res.value = f;
    res.grad_norm = gnorm;
    if (gnorm <= opts.tol) {
      res.converged = true;
      return res;
    }
    if (res.iterations >= opts.max_iter) return res;
    double slope = 0.0;
    for (double gi : g) slope += gi * gi;
    bool accepted = false;
    double alpha = step;
    for (int bt = 0; bt < 80; ++bt) {
      for (std::size_t i = 0; i < x.size(); ++i) trial[i] = x[i] - alpha * g[i];
      const double ft = objective.value(trial);
      if (std::isfinite(ft) && ft <= f - opts.armijo_c * alpha * slope) {
        x = trial;
        f = ft;
        step = alpha * 2.0;
        accepted = true;
        break;
      }
      alpha *= 0.5;
      if (alpha < 1e-18) break;
    }
    if (!accepted) return res;
    ++res.iterations;
  }
}

}  // namespace mlpath
