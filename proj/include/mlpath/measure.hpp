#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <variant>
#include <vector>

#include "mlpath/grid.hpp"
#include "mlpath/numeric.hpp"
#include "mlpath/rng.hpp"

namespace mlpath {

// Reference Gaussian measures: Wiener measure sampled on a grid, or a
// diagonal sequence law (independent coordinates with sd a_n).
struct WienerPathMeasure {
  TimeGrid grid;
};

struct DiagonalSequenceMeasure {
  std::vector<double> weights;

  explicit DiagonalSequenceMeasure(std::vector<double> a) : weights(std::move(a)) {
    if (weights.empty())
      throw std::invalid_argument("DiagonalSequenceMeasure: empty truncation");
    for (double w : weights)
      if (!std::isfinite(w) || w == 0.0)
        throw std::invalid_argument(
            "DiagonalSequenceMeasure: weights must be nonzero");
  }
};

// A reference Gaussian together with its noise scale: mu_0^eps(A) = mu_0(A/eps).
// The Cameron-Martin norm is attached to mu_0 and does not see eps.
struct GaussianMeasureSpec {
  std::variant<WienerPathMeasure, DiagonalSequenceMeasure> law;
  double noise_scale;

  GaussianMeasureSpec(WienerPathMeasure m, double eps)
      : law(std::move(m)), noise_scale(eps) {
    check_eps();
  }
  GaussianMeasureSpec(DiagonalSequenceMeasure m, double eps)
      : law(std::move(m)), noise_scale(eps) {
    check_eps();
  }

  bool is_wiener() const noexcept {
    return std::holds_alternative<WienerPathMeasure>(law);
  }
  const TimeGrid& grid() const {
    if (!is_wiener())
      throw std::invalid_argument("GaussianMeasureSpec: not a Wiener variant");
    return std::get<WienerPathMeasure>(law).grid;
  }
  const std::vector<double>& weights() const {
    if (is_wiener())
      throw std::invalid_argument("GaussianMeasureSpec: not a diagonal variant");
    return std::get<DiagonalSequenceMeasure>(law).weights;
  }

 private:
  void check_eps() const {
    if (!std::isfinite(noise_scale) || noise_scale <= 0.0)
      throw std::invalid_argument("GaussianMeasureSpec: noise scale must be > 0");
  }
};

inline GaussianMeasureSpec wiener_spec(const TimeGrid& g, double eps) {
  return GaussianMeasureSpec(WienerPathMeasure{g}, eps);
}

inline GaussianMeasureSpec diagonal_spec(std::vector<double> weights, double eps) {
  return GaussianMeasureSpec(DiagonalSequenceMeasure(std::move(weights)), eps);
}

inline GaussianMeasureSpec scale(const GaussianMeasureSpec& spec, double new_eps) {
  GaussianMeasureSpec out = spec;
  if (!std::isfinite(new_eps) || new_eps <= 0.0)
    throw std::invalid_argument("scale: noise scale must be > 0");
  out.noise_scale = new_eps;
  return out;
}

// Squared Cameron-Martin norm. Wiener variant: forward differences with
// left-endpoint quadrature, sum (dz_i)^2/dt — the exact norm of the
// piecewise-linear interpolant. Paths with z_0 != 0 are outside the
// Cameron-Martin space and get the +inf sentinel, not an error.
inline double cm_norm_sq(const GaussianMeasureSpec& spec, const DiscretePath& z) {
  if (!spec.is_wiener())
    throw std::invalid_argument("cm_norm_sq: path element on a sequence measure");
  if (z.grid != spec.grid())
    throw std::invalid_argument("cm_norm_sq: grid mismatch");
  if (!all_finite(z.values))
    throw std::invalid_argument("cm_norm_sq: non-finite values");
  if (z.values.front() != 0.0) return kInf;
  const double dt = z.grid.dt();
  KahanSum s;
  for (int i = 0; i < z.grid.n_intervals(); ++i) {
    const double dz = z.values[i + 1] - z.values[i];
    s.add(dz * dz);
  }
  return s.value() / dt;
}

// Diagonal variant: ||z||^2 = sum phi_n^2 a_n^2 = sum z_n^2 / a_n^2.
inline double cm_norm_sq(const GaussianMeasureSpec& spec, const WeightedSequence& z) {
  if (spec.is_wiener())
    throw std::invalid_argument("cm_norm_sq: sequence element on a path measure");
  const auto& a = spec.weights();
  if (a != z.weights)
    throw std::invalid_argument("cm_norm_sq: weight mismatch with the measure");
  if (!all_finite(z.values))
    throw std::invalid_argument("cm_norm_sq: non-finite values");
  KahanSum s;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double q = z.values[i] / a[i];
    s.add(q * q);
  }
  return s.value();
}

// Samples from mu_0^eps. Each sample index owns its own RNG stream, so the
// output is deterministic per seed and independent of the thread count.
inline std::vector<DiscretePath> sample_paths(const GaussianMeasureSpec& spec,
                                              std::uint64_t seed,
                                              std::int64_t count,
                                              int threads = 0) {
  if (count < 1) throw std::invalid_argument("sample_paths: count must be >= 1");
  const TimeGrid& g = spec.grid();
  const double step_sd = spec.noise_scale * std::sqrt(g.dt());
  const int n = g.n_intervals();
  std::vector<DiscretePath> out(static_cast<std::size_t>(count),
                                constant_path(g, 0.0));
  parallel_for(
      count,
      [&](std::int64_t i) {
        StreamRng rng(seed, static_cast<std::uint64_t>(i));
        auto& v = out[static_cast<std::size_t>(i)].values;
        v[0] = 0.0;
        for (int j = 0; j < n; ++j) v[j + 1] = v[j] + step_sd * rng.next_normal();
      },
      threads);
  return out;
}

inline std::vector<WeightedSequence> sample_sequences(const GaussianMeasureSpec& spec,
                                                      std::uint64_t seed,
                                                      std::int64_t count,
                                                      int threads = 0) {
  if (count < 1) throw std::invalid_argument("sample_sequences: count must be >= 1");
  const auto& a = spec.weights();
  std::vector<WeightedSequence> out(
      static_cast<std::size_t>(count),
      WeightedSequence(a, std::vector<double>(a.size(), 0.0)));
  parallel_for(
      count,
      [&](std::int64_t i) {
        StreamRng rng(seed, static_cast<std::uint64_t>(i));
        auto& v = out[static_cast<std::size_t>(i)].values;
        for (std::size_t j = 0; j < a.size(); ++j)
          v[j] = spec.noise_scale * a[j] * rng.next_normal();
      },
      threads);
  return out;
}

using SampleSet =
    std::variant<std::vector<DiscretePath>, std::vector<WeightedSequence>>;

inline SampleSet sample(const GaussianMeasureSpec& spec, std::uint64_t seed,
                        std::int64_t count, int threads = 0) {
  if (spec.is_wiener()) return sample_paths(spec, seed, count, threads);
  return sample_sequences(spec, seed, count, threads);
}

}  // namespace mlpath
