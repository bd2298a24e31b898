#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>

#include "mlpath/rng.hpp"

namespace mlpath {

// Scalar drift b with its derivative. b_second is optional (used for the
// gradient of the OM correction term); when absent it falls back to a
// central difference of b_prime.
struct DriftModel {
  std::function<double(double)> b;
  std::function<double(double)> b_prime;
  std::function<double(double)> b_second;  // may be empty
  std::string name;

  double second(double x) const {
    if (b_second) return b_second(x);
    const double h = 1e-5 * std::max(1.0, std::fabs(x));
    return (b_prime(x + h) - b_prime(x - h)) / (2.0 * h);
  }
};

// Spot check that b_prime differentiates b: central differences at `points`
// random locations in [lo, hi]; returns the worst relative error.
inline double drift_derivative_error(const DriftModel& drift, double lo, double hi,
                                     std::uint64_t seed = 7, int points = 64) {
  if (!(hi > lo)) throw std::invalid_argument("drift_derivative_error: bad range");
  StreamRng rng(seed);
  double worst = 0.0;
  for (int k = 0; k < points; ++k) {
    const double x = lo + (hi - lo) * rng.next_uniform();
    const double h = 1e-5 * std::max(1.0, std::fabs(x));
    const double fd = (drift.b(x + h) - drift.b(x - h)) / (2.0 * h);
    const double bp = drift.b_prime(x);
    const double denom = std::max({1.0, std::fabs(fd), std::fabs(bp)});
    worst = std::max(worst, std::fabs(fd - bp) / denom);
  }
  return worst;
}

}  // namespace mlpath
