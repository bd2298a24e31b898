#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "mlpath/drift.hpp"
#include "mlpath/grid.hpp"
#include "mlpath/numeric.hpp"
#include "mlpath/rng.hpp"
#include "mlpath/tilt.hpp"

namespace mlpath {

// ---------------------------------------------------------------------------
// Drift presets with exact derivatives.
// ---------------------------------------------------------------------------

inline DriftModel preset_drift(const std::string& name,
                               std::optional<double> param = std::nullopt) {
  if (name == "zero") {
    return DriftModel{[](double) { return 0.0; }, [](double) { return 0.0; },
                      [](double) { return 0.0; }, "zero"};
  }
  if (name == "ou") {
    const double theta = param.value_or(1.0);
    if (!std::isfinite(theta)) throw std::invalid_argument("preset_drift: bad theta");
    return DriftModel{[theta](double x) { return -theta * x; },
                      [theta](double) { return -theta; }, [](double) { return 0.0; },
                      "ou(" + std::to_string(theta) + ")"};
  }
  if (name == "double_well") {
    return DriftModel{[](double x) { return x - x * x * x; },
                      [](double x) { return 1.0 - 3.0 * x * x; },
                      [](double x) { return -6.0 * x; }, "double_well"};
  }
  throw std::invalid_argument("preset_drift: unknown preset '" + name + "'");
}

// ---------------------------------------------------------------------------
// Path-dependent linear SDE: X(t) = int_0^t a(s) X_B(s) ds + noise, where the
// Cameron-Martin norm of the law involves the memory kernel e^{-(A(t)-A(s))}.
// ---------------------------------------------------------------------------

struct PathDependentModel {
  std::function<double(double)> a;
  std::function<double(double)> A;  // antiderivative of a
  TimeGrid grid;

  PathDependentModel(std::function<double(double)> a_fn,
                     std::function<double(double)> A_fn, TimeGrid g)
      : a(std::move(a_fn)), A(std::move(A_fn)), grid(g) {
    // Spot check A' = a at a spread of nodes.
    for (int k = 0; k <= 16; ++k) {
      const double t = grid.horizon() * k / 16.0;
      const double h = 1e-5 * std::max(1.0, std::fabs(t));
      const double fd = (A(t + h) - A(t - h)) / (2.0 * h);
      const double at = a(t);
      if (std::fabs(fd - at) > 1e-6 * std::max({1.0, std::fabs(fd), std::fabs(at)}))
        throw std::invalid_argument("PathDependentModel: A' != a");
    }
  }
};

namespace detail {

// Memory response u(t_j) = a(t_j) * int_0^{t_j} e^{-(A(t_j)-A(s))} z'(s) ds,
// with z' piecewise constant and the kernel integrated by trapezoid per
// interval. O(n^2) node pairs.
inline std::vector<double> path_dependent_response(const PathDependentModel& model,
                                                   const DiscretePath& z) {
  const int n = z.grid.n_intervals();
  std::vector<double> bigA(static_cast<std::size_t>(n) + 1);
  for (int j = 0; j <= n; ++j) bigA[static_cast<std::size_t>(j)] = model.A(z.grid.node(j));
  std::vector<double> u(static_cast<std::size_t>(n) + 1, 0.0);
  for (int j = 1; j <= n; ++j) {
    KahanSum s;
    for (int i = 0; i < j; ++i) {
      const double dz = z.values[i + 1] - z.values[i];
      const double k_lo = std::exp(bigA[static_cast<std::size_t>(i)] - bigA[static_cast<std::size_t>(j)]);
      const double k_hi = std::exp(bigA[static_cast<std::size_t>(i) + 1] - bigA[static_cast<std::size_t>(j)]);
      s.add(0.5 * (k_lo + k_hi) * dz);
    }
    u[static_cast<std::size_t>(j)] = model.a(z.grid.node(j)) * s.value();
  }
  u[0] = 0.0;  // empty integral; a(0) * 0
  return u;
}

}  // namespace detail

// (1/2) int (z'(t) - a(t) int_0^t e^{-(A(t)-A(s))} z'(s) ds)^2 dt — half the
// squared Cameron-Martin norm of the path-dependent law; eps-free. +inf when
// z_0 != 0.
inline double path_dependent_cm_half_norm(const PathDependentModel& model,
                                          const DiscretePath& z) {
  if (z.grid != model.grid)
    throw std::invalid_argument("path_dependent_cm_half_norm: grid mismatch");
  if (z.values.front() != 0.0) return kInf;
  const std::vector<double> u = detail::path_dependent_response(model, z);
  const double dt = z.grid.dt();
  KahanSum s;
  for (int i = 0; i < z.grid.n_intervals(); ++i) {
    const double d = (z.values[i + 1] - z.values[i]) / dt;
    const double ubar = 0.5 * (u[static_cast<std::size_t>(i)] + u[static_cast<std::size_t>(i) + 1]);
    const double r = d - ubar;
    s.add(r * r);
  }
  return 0.5 * s.value() * dt;
}

// Tilting expansion for the path-dependent model against Wiener measure:
// F_0(z) = half_norm(z) - ||z||^2/2 evaluated with the same response, so
// eps^2 * om_tilted reproduces the half norm exactly for every eps. The
// quadratic-covariation term is constant in z for this linear model and is
// dropped (these functionals are defined up to additive constants).
inline TiltingExpansion<DiscretePath> path_dependent_expansion(
    const PathDependentModel& model) {
  Functional<DiscretePath> f0;
  f0.value = [model](const DiscretePath& z) {
    if (z.grid != model.grid)
      throw std::invalid_argument("path_dependent_expansion: grid mismatch");
    const std::vector<double> u = detail::path_dependent_response(model, z);
    const double dt = z.grid.dt();
    KahanSum s;
    for (int i = 0; i < z.grid.n_intervals(); ++i) {
      const double dz = z.values[i + 1] - z.values[i];
      const double ubar = 0.5 * (u[static_cast<std::size_t>(i)] + u[static_cast<std::size_t>(i) + 1]);
      s.add(-ubar * dz + 0.5 * dt * ubar * ubar);
    }
    return s.value();
  };
  return TiltingExpansion<DiscretePath>({std::move(f0)});
}

// ---------------------------------------------------------------------------
// System of random algebraic equations x_n = f_n(x_n) + eps a_n xi_n.
// ---------------------------------------------------------------------------

struct AlgebraicSystem {
  std::vector<double> weights;                       // a_n, all nonzero
  std::function<double(std::size_t, double)> map;    // f_n(x), indexed
  std::string map_name;

  AlgebraicSystem(std::vector<double> a, std::function<double(std::size_t, double)> f,
                  std::string name = "custom")
      : weights(std::move(a)), map(std::move(f)), map_name(std::move(name)) {
    if (weights.empty()) throw std::invalid_argument("AlgebraicSystem: empty weights");
    for (double w : weights)
      if (!std::isfinite(w) || w == 0.0)
        throw std::invalid_argument("AlgebraicSystem: weights must be nonzero");
    if (!map) throw std::invalid_argument("AlgebraicSystem: missing map");
  }
};

inline std::vector<double> harmonic_weights(std::size_t n) {
  if (n == 0) throw std::invalid_argument("harmonic_weights: n must be >= 1");
  std::vector<double> a(n);
  for (std::size_t i = 0; i < n; ++i) a[i] = 1.0 / static_cast<double>(i + 1);
  return a;
}

// Map presets. The linear preset enforces |kappa| <= 0.9 and the tanh preset
// is scaled by 0.9, keeping the declared contraction property.
inline AlgebraicSystem algebraic_system_preset(std::vector<double> weights,
                                               const std::string& map_name,
                                               double kappa = 0.5) {
  if (map_name == "zero")
    return AlgebraicSystem(std::move(weights),
                           [](std::size_t, double) { return 0.0; }, "zero");
  if (map_name == "linear") {
    if (!(std::fabs(kappa) <= 0.9))
      throw std::invalid_argument("algebraic_system_preset: |kappa| must be <= 0.9");
    return AlgebraicSystem(std::move(weights),
                           [kappa](std::size_t, double x) { return kappa * x; },
                           "linear(" + std::to_string(kappa) + ")");
  }
  if (map_name == "tanh09")
    return AlgebraicSystem(std::move(weights),
                           [](std::size_t, double x) { return 0.9 * std::tanh(x); },
                           "tanh09");
  throw std::invalid_argument("algebraic_system_preset: unknown map '" + map_name + "'");
}

struct AlgebraicFwResult {
  double value;            // (1/2) sum (phi_n - f_n(phi_n))^2 a_n^2
  std::vector<double> z;   // z_n = a_n^2 phi_n
};

inline AlgebraicFwResult algebraic_fw(const AlgebraicSystem& system,
                                      const std::vector<double>& phi) {
  if (phi.size() != system.weights.size())
    throw std::invalid_argument("algebraic_fw: length mismatch");
  KahanSum s;
  std::vector<double> z(phi.size());
  for (std::size_t n = 0; n < phi.size(); ++n) {
    const double a = system.weights[n];
    const double r = (phi[n] - system.map(n, phi[n])) * a;
    s.add(r * r);
    z[n] = a * a * phi[n];
  }
  return AlgebraicFwResult{0.5 * s.value(), std::move(z)};
}

struct AlgebraicSolveResult {
  WeightedSequence solution;
  std::vector<double> residuals;   // |x_n - f_n(x_n) - eps a_n xi_n|
  std::vector<char> converged;     // per coordinate
  bool all_converged;
};

// Solves x_n = f_n(x_n) + eps * noise_n coordinatewise by fixed-point
// iteration to residual <= 1e-12. `noise` carries unit-scale values a_n xi_n
// (e.g. sample_sequences at eps 1); this op applies eps. Maps are declared
// contractions; coordinates that fail to converge within the cap are
// reported, not thrown.
inline AlgebraicSolveResult algebraic_solve(const AlgebraicSystem& system,
                                            const WeightedSequence& noise, double eps,
                                            int threads = 0) {
  if (noise.weights != system.weights)
    throw std::invalid_argument("algebraic_solve: weight mismatch");
  if (!std::isfinite(eps)) throw std::invalid_argument("algebraic_solve: bad eps");
  const std::size_t n = system.weights.size();
  AlgebraicSolveResult out{WeightedSequence(system.weights, std::vector<double>(n, 0.0)),
                           std::vector<double>(n, 0.0), std::vector<char>(n, 0), true};
  constexpr int kMaxIter = 1000;
  constexpr double kTol = 1e-12;
  parallel_for(
      static_cast<std::int64_t>(n),
      [&](std::int64_t i) {
        const std::size_t k = static_cast<std::size_t>(i);
        const double c = eps * noise.values[k];
        double x = c;
        double res = kInf;
        for (int it = 0; it < kMaxIter; ++it) {
          const double fx = system.map(k, x);
          res = std::fabs(x - fx - c);
          if (res <= kTol) break;
          x = fx + c;
        }
        if (std::isfinite(x)) {
          const double fx = system.map(k, x);
          res = std::fabs(x - fx - c);
          out.solution.values[k] = x;
        } else {
          out.solution.values[k] = 0.0;
          res = kInf;
        }
        out.residuals[k] = res;
        out.converged[k] = res <= kTol ? 1 : 0;
      },
      threads);
  for (char c : out.converged)
    if (!c) {
      out.all_converged = false;
      break;
    }
  return out;
}

// Tilting expansion for the algebraic system against the diagonal Gaussian:
// F_0(z) = -sum f_n(phi_n) phi_n a_n^2 + 1/2 sum f_n(phi_n)^2 a_n^2, so that
// F_0 + ||z||^2/2 = (1/2) sum (phi_n - f_n(phi_n))^2 a_n^2. The pairing is a
// plain sum here (no stochastic integral), so there is no eps correction and
// eps^2 OM_eps equals FW for every eps.
inline TiltingExpansion<WeightedSequence> algebraic_expansion(
    const AlgebraicSystem& system) {
  Functional<WeightedSequence> f0;
  f0.value = [system](const WeightedSequence& z) {
    if (z.weights != system.weights)
      throw std::invalid_argument("algebraic_expansion: weight mismatch");
    KahanSum s;
    for (std::size_t n = 0; n < z.values.size(); ++n) {
      const double a = z.weights[n];
      const double phi = z.values[n] / (a * a);
      const double f = system.map(n, phi);
      s.add(a * a * (-f * phi + 0.5 * f * f));
    }
    return s.value();
  };
  return TiltingExpansion<WeightedSequence>({std::move(f0)});
}

// H for the generalized-Girsanov route on the diagonal case: coordinates
// f_n(phi_n) in the Cameron-Martin chart, i.e. H(z)_n = a_n^2 f_n(phi_n).
inline std::function<WeightedSequence(const WeightedSequence&)> h_from_algebraic(
    const AlgebraicSystem& system) {
  return [system](const WeightedSequence& z) {
    std::vector<double> h(z.values.size());
    for (std::size_t n = 0; n < h.size(); ++n) {
      const double a = z.weights[n];
      h[n] = a * a * system.map(n, z.values[n] / (a * a));
    }
    return WeightedSequence(z.weights, std::move(h));
  };
}

}  // namespace mlpath
