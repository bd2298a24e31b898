#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "mlpath/drift.hpp"
#include "mlpath/functional_value.hpp"
#include "mlpath/grid.hpp"
#include "mlpath/measure.hpp"
#include "mlpath/numeric.hpp"
#include "mlpath/optimize.hpp"

namespace mlpath {

// ---------------------------------------------------------------------------
// Discretization used by every SDE-flavored functional. One shared scheme
// keeps the algebraic identities between the different derivations exact on
// the grid, not just up to O(dt^2):
//   d_i    = (z_{i+1} - z_i)/dt                     forward difference
//   bbar_i = (b(z_i) + b(z_{i+1}))/2                interval drift average
//   action = sum dt (d_i - bbar_i)^2               \int (z' - b(z))^2 dt
//   I_strat= sum bbar_i (z_{i+1} - z_i)            \int b(z) dz (trapezoid)
//   trap[g]= node trapezoid                         plain dt integrals
// With these, action = ||z||^2 - 2 I_strat + sum dt bbar_i^2 holds exactly.
//
// Sign convention, fixed here for the whole module: tilted measures carry
// the exponent dmu/dmu_0 = exp(-F^eps / eps^2) / normalization. A density
// written with a positive exponent (the SDE Girsanov weight) enters as its
// negation, so F_0 = -(I_strat - 1/2 int b^2 dt) and F_2 = int b'(z) dt.
// ---------------------------------------------------------------------------

enum class StochasticScheme { ito_left, stratonovich_trapezoid };

namespace detail {

inline std::vector<double> drift_at_nodes(const std::function<double(double)>& f,
                                          const DiscretePath& z) {
  std::vector<double> out(z.values.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(z.values[i]);
  return out;
}

inline double sde_action(const std::vector<double>& b_nodes, const DiscretePath& z) {
  const double dt = z.grid.dt();
  KahanSum s;
  for (int i = 0; i < z.grid.n_intervals(); ++i) {
    const double d = (z.values[i + 1] - z.values[i]) / dt;
    const double bbar = 0.5 * (b_nodes[i] + b_nodes[i + 1]);
    const double r = d - bbar;
    s.add(r * r);
  }
  return s.value() * dt;
}

// d(action)/dz_k and d(||z||^2)/dz_k; shared by the objective factories and
// the expansion gradients.
inline std::vector<double> sde_action_gradient(const DriftModel& drift,
                                               const DiscretePath& z) {
  const double dt = z.grid.dt();
  const int n = z.grid.n_intervals();
  std::vector<double> g(z.values.size(), 0.0);
  std::vector<double> r(static_cast<std::size_t>(n));
  std::vector<double> bp(z.values.size());
  double b_prev = drift.b(z.values[0]);
  bp[0] = drift.b_prime(z.values[0]);
  for (int i = 0; i < n; ++i) {
    const double b_next = drift.b(z.values[i + 1]);
    bp[i + 1] = drift.b_prime(z.values[i + 1]);
    r[static_cast<std::size_t>(i)] =
        (z.values[i + 1] - z.values[i]) / dt - 0.5 * (b_prev + b_next);
    b_prev = b_next;
  }
  for (int k = 0; k <= n; ++k) {
    double acc = 0.0;
    if (k > 0)
      acc += 2.0 * r[static_cast<std::size_t>(k - 1)] -
             dt * bp[k] * r[static_cast<std::size_t>(k - 1)];
    if (k < n)
      acc += -2.0 * r[static_cast<std::size_t>(k)] -
             dt * bp[k] * r[static_cast<std::size_t>(k)];
    g[static_cast<std::size_t>(k)] = acc;
  }
  return g;
}

inline std::vector<double> cm_norm_sq_gradient(const DiscretePath& z) {
  const double dt = z.grid.dt();
  const int n = z.grid.n_intervals();
  std::vector<double> g(z.values.size(), 0.0);
  for (int k = 0; k <= n; ++k) {
    double acc = 0.0;
    if (k > 0) acc += 2.0 * (z.values[k] - z.values[k - 1]) / dt;
    if (k < n) acc -= 2.0 * (z.values[k + 1] - z.values[k]) / dt;
    g[static_cast<std::size_t>(k)] = acc;
  }
  return g;
}

struct ShiftCache {
  std::mutex mutex;
  std::map<std::string, double> values;
};

inline std::string measure_key(const GaussianMeasureSpec& spec) {
  if (spec.is_wiener()) {
    const TimeGrid& g = spec.grid();
    return "W|" + std::to_string(g.horizon()) + "|" + std::to_string(g.n_intervals());
  }
  // FNV-1a over the weight bytes.
  std::uint64_t h = 1469598103934665603ULL;
  for (double w : spec.weights()) {
    unsigned char bytes[sizeof(double)];
    std::memcpy(bytes, &w, sizeof(double));
    for (unsigned char b : bytes) {
      h ^= b;
      h *= 1099511628211ULL;
    }
  }
  return "D|" + std::to_string(spec.weights().size()) + "|" + std::to_string(h);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Tilting expansions F^eps = F_0 + eps F_1 + (eps^2/2) F_2 + ... + eps^n R_n.
// Term weights follow the factorial pattern eps^i / i!. Moment parameters
// gamma_i are declared metadata and are not verified here.
// ---------------------------------------------------------------------------

template <class Elem>
struct Functional {
  std::function<double(const Elem&)> value;
  std::function<std::vector<double>(const Elem&)> gradient;  // optional
};

template <class Elem>
class TiltingExpansion {
 public:
  TiltingExpansion(std::vector<Functional<Elem>> terms,
                   std::function<double(double, const Elem&)> remainder = {},
                   std::vector<double> moment_params = {})
      : terms_(std::move(terms)),
        remainder_(std::move(remainder)),
        moment_params_(std::move(moment_params)) {
    if (terms_.empty())
      throw std::invalid_argument("TiltingExpansion: needs at least F_0");
    for (const auto& t : terms_)
      if (!t.value) throw std::invalid_argument("TiltingExpansion: missing term");
    if (moment_params_.empty()) moment_params_.assign(terms_.size(), 1.0);
    if (moment_params_.size() != terms_.size())
      throw std::invalid_argument("TiltingExpansion: order/moment-param mismatch");
    for (double gamma : moment_params_)
      if (!(gamma > 0.0))
        throw std::invalid_argument("TiltingExpansion: moment params must be > 0");
  }

  int order() const noexcept { return static_cast<int>(terms_.size()) - 1; }
  const std::vector<Functional<Elem>>& terms() const noexcept { return terms_; }
  const Functional<Elem>& term(int i) const { return terms_.at(static_cast<std::size_t>(i)); }
  const std::vector<double>& moment_params() const noexcept { return moment_params_; }
  bool has_remainder() const noexcept { return static_cast<bool>(remainder_); }
  double remainder(double eps, const Elem& z) const {
    return remainder_ ? remainder_(eps, z) : 0.0;
  }

  // F^eps(z) with the factorial weights.
  double tilt_value(double eps, const Elem& z) const {
    double w = 1.0;
    double sum = 0.0;
    for (std::size_t i = 0; i < terms_.size(); ++i) {
      if (i > 0) w *= eps / static_cast<double>(i);
      sum += w * terms_[i].value(z);
    }
    if (remainder_) sum += std::pow(eps, order()) * remainder_(eps, z);
    return sum;
  }

  detail::ShiftCache& shift_cache() const { return *shift_cache_; }

 private:
  std::vector<Functional<Elem>> terms_;
  std::function<double(double, const Elem&)> remainder_;
  std::vector<double> moment_params_;
  std::shared_ptr<detail::ShiftCache> shift_cache_ = std::make_shared<detail::ShiftCache>();
};

// Expansion with every term identically zero (the pure Gaussian case).
template <class Elem>
TiltingExpansion<Elem> zero_expansion(int order = 0) {
  std::vector<Functional<Elem>> terms(static_cast<std::size_t>(order) + 1);
  for (auto& t : terms)
    t = Functional<Elem>{[](const Elem&) { return 0.0; },
                         [](const Elem& z) {
                           if constexpr (std::is_same_v<Elem, DiscretePath>)
                             return std::vector<double>(z.values.size(), 0.0);
                           else
                             return std::vector<double>(z.values.size(), 0.0);
                         }};
  return TiltingExpansion<Elem>(std::move(terms));
}

// ---------------------------------------------------------------------------
// OM and FW functionals for exponentially tilted Gaussian measures.
// ---------------------------------------------------------------------------

// OM_{mu^eps}(z) = F^eps(z)/eps^2 + ||z||^2/(2 eps^2) on the Cameron-Martin
// space, +inf outside (reported through the cm_barrier component).
template <class Elem>
FunctionalValue om_tilted(const GaussianMeasureSpec& spec,
                          const TiltingExpansion<Elem>& expansion, const Elem& z,
                          double eps) {
  if (!(eps > 0.0)) throw std::invalid_argument("om_tilted: eps must be > 0");
  const double cm = cm_norm_sq(spec, z);
  if (std::isinf(cm))
    return FunctionalValue::from_components({{kCmBarrier, kInf}});
  const double inv = 1.0 / (eps * eps);
  return FunctionalValue::from_components(
      {{"tilt", expansion.tilt_value(eps, z) * inv}, {"cm_half_norm", 0.5 * cm * inv}});
}

namespace detail {

template <class Elem>
double compute_shift(const GaussianMeasureSpec& spec,
                     const TiltingExpansion<Elem>& expansion);

// inf over the Cameron-Martin space of F_0 + ||.||^2/2, by multi-start
// descent over pinned paths (Wiener) or coordinate vectors (diagonal).
template <>
inline double compute_shift<DiscretePath>(const GaussianMeasureSpec& spec,
                                          const TiltingExpansion<DiscretePath>& expansion) {
  const Functional<DiscretePath>& f0 = expansion.term(0);
  PathObjective obj;
  obj.value = [&spec, &f0](const DiscretePath& z) {
    const double cm = cm_norm_sq(spec, z);
    return std::isinf(cm) ? kInf : f0.value(z) + 0.5 * cm;
  };
  if (f0.gradient)
    obj.gradient = [&f0](const DiscretePath& z) {
      std::vector<double> g = f0.gradient(z);
      const std::vector<double> gn = cm_norm_sq_gradient(z);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += 0.5 * gn[i];
      return g;
    };
  const TimeGrid& g = spec.grid();
  Constraints pins;
  pins.pin_start = 0.0;
  pins.pin_end = std::nullopt;
  const std::vector<DiscretePath> starts = {constant_path(g, 0.0), linear_path(g, 0.0, 1.0),
                                            linear_path(g, 0.0, -1.0)};
  MinimizeOptions opts;
  const auto minima = multi_start(obj, starts, pins, opts);
  return minima.front().value;
}

template <>
inline double compute_shift<WeightedSequence>(
    const GaussianMeasureSpec& spec, const TiltingExpansion<WeightedSequence>& expansion) {
  const Functional<WeightedSequence>& f0 = expansion.term(0);
  const std::vector<double>& a = spec.weights();
  VectorObjective obj;
  obj.value = [&](const std::vector<double>& phi) {
    const WeightedSequence z = sequence_from_phi(a, phi);
    double quad = 0.0;
    for (std::size_t i = 0; i < phi.size(); ++i) quad += phi[i] * phi[i] * a[i] * a[i];
    return f0.value(z) + 0.5 * quad;
  };
  if (f0.gradient)
    obj.gradient = [&](const std::vector<double>& phi) {
      const WeightedSequence z = sequence_from_phi(a, phi);
      std::vector<double> gz = f0.gradient(z);  // d/dz_n
      for (std::size_t i = 0; i < phi.size(); ++i) {
        const double a2 = a[i] * a[i];
        gz[i] = a2 * gz[i] + a2 * phi[i];
      }
      return gz;
    };
  auto res = minimize_vector(obj, std::vector<double>(a.size(), 0.0));
  return res.value;
}

}  // namespace detail

// Shift constant inf (F_0 + ||.||^2/2); computed once per measure and cached
// in the expansion (concurrent reads, single writer under the cache mutex).
template <class Elem>
double fw_shift(const GaussianMeasureSpec& spec, const TiltingExpansion<Elem>& expansion) {
  detail::ShiftCache& cache = expansion.shift_cache();
  const std::string key = detail::measure_key(spec);
  std::lock_guard<std::mutex> lock(cache.mutex);
  auto it = cache.values.find(key);
  if (it != cache.values.end()) return it->second;
  const double s = detail::compute_shift<Elem>(spec, expansion);
  cache.values.emplace(key, s);
  return s;
}

// FW(z) = F_0(z) + ||z||^2/2 - inf(F_0 + ||.||^2/2); the shift is dropped
// when shifted == false (identity tests), which cannot move the argmin.
template <class Elem>
FunctionalValue fw_tilted(const GaussianMeasureSpec& spec,
                          const TiltingExpansion<Elem>& expansion, const Elem& z,
                          bool shifted = true) {
  const double cm = cm_norm_sq(spec, z);
  if (std::isinf(cm))
    return FunctionalValue::from_components({{kCmBarrier, kInf}});
  std::map<std::string, double> parts{{"tilt", expansion.term(0).value(z)},
                                      {"cm_half_norm", 0.5 * cm}};
  if (shifted) parts.emplace("shift", -fw_shift(spec, expansion));
  return FunctionalValue::from_components(std::move(parts));
}

// ---------------------------------------------------------------------------
// The small-noise SDE dX = b(X) dt + eps dB specialization.
// ---------------------------------------------------------------------------

// Order-2 expansion from the Girsanov density in Stratonovich form:
//   F_0(z) = -( I_strat(b, z) - 1/2 int b^2(z) dt ),  F_1 = 0,
//   F_2(z) = int b'(z) dt,                             R_2 = 0.
inline TiltingExpansion<DiscretePath> sde_expansion(const DriftModel& drift,
                                                    const TimeGrid& grid) {
  Functional<DiscretePath> f0;
  f0.value = [drift, grid](const DiscretePath& z) {
    if (z.grid != grid) throw std::invalid_argument("sde_expansion: grid mismatch");
    const double dt = grid.dt();
    KahanSum s;
    double b_prev = drift.b(z.values[0]);
    for (int i = 0; i < grid.n_intervals(); ++i) {
      const double b_next = drift.b(z.values[i + 1]);
      const double bbar = 0.5 * (b_prev + b_next);
      const double dz = z.values[i + 1] - z.values[i];
      s.add(-bbar * dz + 0.5 * dt * bbar * bbar);
      b_prev = b_next;
    }
    return s.value();
  };
  f0.gradient = [drift](const DiscretePath& z) {
    // F_0 = (action - ||z||^2)/2 exactly under the shared scheme.
    std::vector<double> g = detail::sde_action_gradient(drift, z);
    const std::vector<double> gn = detail::cm_norm_sq_gradient(z);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = 0.5 * (g[i] - gn[i]);
    return g;
  };

  Functional<DiscretePath> f1;
  f1.value = [](const DiscretePath&) { return 0.0; };
  f1.gradient = [](const DiscretePath& z) {
    return std::vector<double>(z.values.size(), 0.0);
  };

  Functional<DiscretePath> f2;
  f2.value = [drift](const DiscretePath& z) {
    return trapezoid(detail::drift_at_nodes(drift.b_prime, z), z.grid.dt());
  };
  f2.gradient = [drift](const DiscretePath& z) {
    const double dt = z.grid.dt();
    const int n = z.grid.n_intervals();
    std::vector<double> g(z.values.size());
    for (int k = 0; k <= n; ++k) {
      const double w = (k == 0 || k == n) ? 0.5 : 1.0;
      g[static_cast<std::size_t>(k)] = dt * w * drift.second(z.values[k]);
    }
    return g;
  };

  return TiltingExpansion<DiscretePath>({std::move(f0), std::move(f1), std::move(f2)});
}

// OM_{X^eps}(z) = 1/(2 eps^2) int [(z'-b(z))^2 + eps^2 b'(z)] dt, with the
// action and correction reported separately; +inf when z_0 != start.
inline FunctionalValue om_sde(const DriftModel& drift, const DiscretePath& z, double eps,
                              double start = 0.0) {
  if (!(eps > 0.0)) throw std::invalid_argument("om_sde: eps must be > 0");
  if (z.values.front() != start)
    return FunctionalValue::from_components({{kCmBarrier, kInf}});
  const auto b_nodes = detail::drift_at_nodes(drift.b, z);
  const double action = detail::sde_action(b_nodes, z);
  const double corr = trapezoid(detail::drift_at_nodes(drift.b_prime, z), z.grid.dt());
  return FunctionalValue::from_components(
      {{"action", 0.5 * action / (eps * eps)}, {"correction", 0.5 * corr}});
}

// FW_X(z) = 1/2 int (z'-b(z))^2 dt.
inline FunctionalValue fw_sde(const DriftModel& drift, const DiscretePath& z,
                              double start = 0.0) {
  if (z.values.front() != start)
    return FunctionalValue::from_components({{kCmBarrier, kInf}});
  const auto b_nodes = detail::drift_at_nodes(drift.b, z);
  return FunctionalValue::from_components(
      {{"action", 0.5 * detail::sde_action(b_nodes, z)}});
}

// (1/2) int b'(z(t)) dt — the quadratic-covariation correction separating
// eps^2 OM from FW.
inline double om_correction(const DriftModel& drift, const DiscretePath& z) {
  return 0.5 * trapezoid(detail::drift_at_nodes(drift.b_prime, z), z.grid.dt());
}

// eps^2 * OM - FW evaluated from the finite quadrature components, so the
// identity value (eps^2/2) int b'(z) dt is returned even past the barrier.
inline double pointwise_gap(const DriftModel& drift, const DiscretePath& z, double eps) {
  const double om = om_sde(drift, z, eps, z.values.front()).finite_part();
  const double fw = fw_sde(drift, z, z.values.front()).finite_part();
  return eps * eps * om - fw;
}

// FW via the generalized Girsanov route: 1/2 ||z - H(z)||^2 on the
// Cameron-Martin space.
inline FunctionalValue fw_girsanov_residual(
    const GaussianMeasureSpec& spec,
    const std::function<DiscretePath(const DiscretePath&)>& h_of_z,
    const DiscretePath& z) {
  DiscretePath h = h_of_z(z);
  if (h.grid != z.grid)
    throw std::invalid_argument("fw_girsanov_residual: H(z) on a different grid");
  std::vector<double> diff(z.values.size());
  for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = z.values[i] - h.values[i];
  const double cm = cm_norm_sq(spec, DiscretePath(z.grid, std::move(diff)));
  if (std::isinf(cm))
    return FunctionalValue::from_components({{kCmBarrier, kInf}});
  return FunctionalValue::from_components({{"residual_half_norm", 0.5 * cm}});
}

inline FunctionalValue fw_girsanov_residual(
    const GaussianMeasureSpec& spec,
    const std::function<WeightedSequence(const WeightedSequence&)>& h_of_z,
    const WeightedSequence& z) {
  WeightedSequence h = h_of_z(z);
  if (h.weights != z.weights)
    throw std::invalid_argument("fw_girsanov_residual: H(z) weight mismatch");
  std::vector<double> diff(z.values.size());
  for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = z.values[i] - h.values[i];
  const double cm = cm_norm_sq(spec, WeightedSequence(z.weights, std::move(diff)));
  if (std::isinf(cm))
    return FunctionalValue::from_components({{kCmBarrier, kInf}});
  return FunctionalValue::from_components({{"residual_half_norm", 0.5 * cm}});
}

// H(z)(t) = int_0^t b(z(s)) ds by the trapezoid cumulative sum — under the
// shared scheme, 1/2 ||z - H(z)||^2 then equals fw_sde exactly.
inline std::function<DiscretePath(const DiscretePath&)> h_from_drift(const DriftModel& drift) {
  return [drift](const DiscretePath& z) {
    const double dt = z.grid.dt();
    std::vector<double> h(z.values.size());
    h[0] = 0.0;
    double b_prev = drift.b(z.values[0]);
    for (int i = 0; i < z.grid.n_intervals(); ++i) {
      const double b_next = drift.b(z.values[i + 1]);
      h[static_cast<std::size_t>(i + 1)] =
          h[static_cast<std::size_t>(i)] + dt * 0.5 * (b_prev + b_next);
      b_prev = b_next;
    }
    return DiscretePath(z.grid, std::move(h));
  };
}

// The pathwise stochastic-integral part int b(z) dz under either scheme.
inline double stochastic_integral(const std::function<double(double)>& b,
                                  const DiscretePath& z, StochasticScheme scheme) {
  KahanSum s;
  double b_prev = b(z.values[0]);
  for (int i = 0; i < z.grid.n_intervals(); ++i) {
    const double dz = z.values[i + 1] - z.values[i];
    if (scheme == StochasticScheme::ito_left) {
      s.add(b_prev * dz);
      b_prev = b(z.values[i + 1]);
    } else {
      const double b_next = b(z.values[i + 1]);
      s.add(0.5 * (b_prev + b_next) * dz);
      b_prev = b_next;
    }
  }
  return s.value();
}

// log dmu^eps/dmu_0^eps along a path. ito_left discretizes both integrals at
// left endpoints, which makes E_{mu_0^eps}[exp(log density)] = 1 exact for
// the discrete model; stratonovich_trapezoid subtracts the (eps^2/2) int b'
// conversion term.
inline double girsanov_log_density(const DriftModel& drift, const DiscretePath& z,
                                   double eps, StochasticScheme scheme) {
  if (!(eps > 0.0)) throw std::invalid_argument("girsanov_log_density: eps must be > 0");
  const double dt = z.grid.dt();
  const double integral = stochastic_integral(drift.b, z, scheme);
  if (scheme == StochasticScheme::ito_left) {
    KahanSum b2;
    for (int i = 0; i < z.grid.n_intervals(); ++i) {
      const double bi = drift.b(z.values[i]);
      b2.add(bi * bi);
    }
    return (integral - 0.5 * dt * b2.value()) / (eps * eps);
  }
  std::vector<double> b2_nodes(z.values.size());
  for (std::size_t i = 0; i < b2_nodes.size(); ++i) {
    const double bi = drift.b(z.values[i]);
    b2_nodes[i] = bi * bi;
  }
  const double b2 = trapezoid(b2_nodes, dt);
  const double conv = trapezoid(detail::drift_at_nodes(drift.b_prime, z), dt);
  return (integral - 0.5 * b2) / (eps * eps) - 0.5 * conv;
}

// ---------------------------------------------------------------------------
// Objective factories for the variational layer.
// ---------------------------------------------------------------------------

inline PathObjective fw_path_objective(const DriftModel& drift, double start = 0.0) {
  PathObjective obj;
  obj.value = [drift, start](const DiscretePath& z) {
    return fw_sde(drift, z, start).value;
  };
  obj.gradient = [drift](const DiscretePath& z) {
    std::vector<double> g = detail::sde_action_gradient(drift, z);
    for (double& v : g) v *= 0.5;
    return g;
  };
  return obj;
}

inline PathObjective om_path_objective(const DriftModel& drift, double eps,
                                       double start = 0.0) {
  if (!(eps > 0.0)) throw std::invalid_argument("om_path_objective: eps must be > 0");
  PathObjective obj;
  obj.value = [drift, eps, start](const DiscretePath& z) {
    return om_sde(drift, z, eps, start).value;
  };
  obj.gradient = [drift, eps](const DiscretePath& z) {
    std::vector<double> g = detail::sde_action_gradient(drift, z);
    const double dt = z.grid.dt();
    const int n = z.grid.n_intervals();
    const double half_inv = 0.5 / (eps * eps);
    for (int k = 0; k <= n; ++k) {
      const double w = (k == 0 || k == n) ? 0.5 : 1.0;
      g[static_cast<std::size_t>(k)] = half_inv * g[static_cast<std::size_t>(k)] +
                                       0.5 * dt * w * drift.second(z.values[k]);
    }
    return g;
  };
  return obj;
}

// eps^2 * OM_eps — same minimizers as OM_eps, but O(1) in eps, so descent
// tolerances mean the same thing along an eps ladder and the correction term
// vanishes smoothly from the gradient as eps -> 0. This is also the
// Gamma-family member used by the convergence diagnostics.
inline PathObjective om_scaled_path_objective(const DriftModel& drift, double eps,
                                              double start = 0.0) {
  if (!(eps > 0.0))
    throw std::invalid_argument("om_scaled_path_objective: eps must be > 0");
  PathObjective obj;
  obj.value = [drift, eps, start](const DiscretePath& z) {
    const FunctionalValue om = om_sde(drift, z, eps, start);
    return om.is_infinite() ? kInf : eps * eps * om.value;
  };
  obj.gradient = [drift, eps](const DiscretePath& z) {
    std::vector<double> g = detail::sde_action_gradient(drift, z);
    const double dt = z.grid.dt();
    const int n = z.grid.n_intervals();
    const double e2 = eps * eps;
    for (int k = 0; k <= n; ++k) {
      const double w = (k == 0 || k == n) ? 0.5 : 1.0;
      g[static_cast<std::size_t>(k)] = 0.5 * g[static_cast<std::size_t>(k)] +
                                       e2 * 0.5 * dt * w * drift.second(z.values[k]);
    }
    return g;
  };
  return obj;
}

}  // namespace mlpath
