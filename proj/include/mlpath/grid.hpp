#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "mlpath/numeric.hpp"

namespace mlpath {

// Uniform grid on [0, T] with n intervals / n+1 nodes.
class TimeGrid {
 public:
  TimeGrid(double horizon, int n_intervals)
      : horizon_(horizon), n_intervals_(n_intervals) {
    if (!std::isfinite(horizon) || horizon <= 0.0)
      throw std::invalid_argument("TimeGrid: horizon must be positive");
    if (n_intervals < 1)
      throw std::invalid_argument("TimeGrid: need at least one interval");
  }

  double horizon() const noexcept { return horizon_; }
  int n_intervals() const noexcept { return n_intervals_; }
  int n_nodes() const noexcept { return n_intervals_ + 1; }
  double dt() const noexcept { return horizon_ / n_intervals_; }
  double node(int i) const noexcept { return horizon_ * i / n_intervals_; }

  friend bool operator==(const TimeGrid& a, const TimeGrid& b) noexcept {
    return a.horizon_ == b.horizon_ && a.n_intervals_ == b.n_intervals_;
  }
  friend bool operator!=(const TimeGrid& a, const TimeGrid& b) noexcept {
    return !(a == b);
  }

 private:
  double horizon_;
  int n_intervals_;
};

// Nodal values z_0..z_n on a grid. Values are a public member so optimizer
// loops can update them in place; the constructor validates shape and
// finiteness once.
struct DiscretePath {
  TimeGrid grid;
  std::vector<double> values;

  DiscretePath(TimeGrid g, std::vector<double> v)
      : grid(g), values(std::move(v)) {
    if (values.size() != static_cast<std::size_t>(grid.n_nodes()))
      throw std::invalid_argument("DiscretePath: value count != node count");
    if (!all_finite(values))
      throw std::invalid_argument("DiscretePath: non-finite value");
  }
};

// Truncated sequence element: weights a_1..a_N (all nonzero) and values
// z_1..z_N. Coordinates phi_n = z_n / a_n^2 are the Cameron-Martin chart.
struct WeightedSequence {
  std::vector<double> weights;
  std::vector<double> values;

  WeightedSequence(std::vector<double> a, std::vector<double> z)
      : weights(std::move(a)), values(std::move(z)) {
    if (weights.empty())
      throw std::invalid_argument("WeightedSequence: empty truncation");
    if (weights.size() != values.size())
      throw std::invalid_argument("WeightedSequence: length mismatch");
    for (double w : weights)
      if (!std::isfinite(w) || w == 0.0)
        throw std::invalid_argument("WeightedSequence: weights must be nonzero");
    if (!all_finite(values))
      throw std::invalid_argument("WeightedSequence: non-finite value");
  }
};

// Forward differences d_i = (z_{i+1} - z_i) / dt, one per interval.
inline std::vector<double> path_derivative(const DiscretePath& p) {
  const int n = p.grid.n_intervals();
  const double dt = p.grid.dt();
  std::vector<double> d(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    d[static_cast<std::size_t>(i)] = (p.values[i + 1] - p.values[i]) / dt;
  return d;
}

inline double sup_norm(const std::vector<double>& v) noexcept {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::fabs(x));
  return m;
}

// Sup-norm distance over grid nodes; this is the metric fixed for all ball
// events and mode distances.
inline double sup_distance(const DiscretePath& a, const DiscretePath& b) {
  if (a.grid != b.grid)
    throw std::invalid_argument("sup_distance: paths on different grids");
  double m = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i)
    m = std::max(m, std::fabs(a.values[i] - b.values[i]));
  return m;
}

inline DiscretePath constant_path(const TimeGrid& g, double c) {
  return DiscretePath(g, std::vector<double>(static_cast<std::size_t>(g.n_nodes()), c));
}

inline DiscretePath linear_path(const TimeGrid& g, double z0, double zT) {
  std::vector<double> v(static_cast<std::size_t>(g.n_nodes()));
  for (int i = 0; i < g.n_nodes(); ++i)
    v[static_cast<std::size_t>(i)] = z0 + (zT - z0) * g.node(i) / g.horizon();
  // Endpoints exactly: pins are checked by equality.
  v.front() = z0;
  v.back() = zT;
  return DiscretePath(g, std::move(v));
}

inline DiscretePath path_from_function(const TimeGrid& g,
                                       const std::function<double(double)>& f) {
  std::vector<double> v(static_cast<std::size_t>(g.n_nodes()));
  for (int i = 0; i < g.n_nodes(); ++i) v[static_cast<std::size_t>(i)] = f(g.node(i));
  return DiscretePath(g, std::move(v));
}

inline std::vector<double> phi_coordinates(const WeightedSequence& s) {
  std::vector<double> phi(s.values.size());
  for (std::size_t i = 0; i < phi.size(); ++i)
    phi[i] = s.values[i] / (s.weights[i] * s.weights[i]);
  return phi;
}

inline WeightedSequence sequence_from_phi(const std::vector<double>& weights,
                                          const std::vector<double>& phi) {
  if (weights.size() != phi.size())
    throw std::invalid_argument("sequence_from_phi: length mismatch");
  std::vector<double> z(phi.size());
  for (std::size_t i = 0; i < phi.size(); ++i)
    z[i] = weights[i] * weights[i] * phi[i];
  return WeightedSequence(weights, z);
}

}  // namespace mlpath
