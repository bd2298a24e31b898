#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

namespace mlpath {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// Shortest round-trip decimal text; all CSV output must be byte-stable
// across reruns.
inline std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

// Compensated summation; the sequence-space norms add up to 10^6 terms and
// the MC reductions add 10^7, where naive accumulation loses digits.
class KahanSum {
 public:
  void add(double x) noexcept {
    const double y = x - carry_;
    const double t = sum_ + y;
    carry_ = (t - sum_) - y;
    sum_ = t;
  }
  double value() const noexcept { return sum_; }

 private:
  double sum_ = 0.0;
  double carry_ = 0.0;
};

// Trapezoid rule over node values g_0..g_n on a uniform step dt.
inline double trapezoid(const std::vector<double>& g, double dt) {
  KahanSum s;
  const std::size_t n = g.size();
  if (n < 2) return 0.0;
  s.add(0.5 * g.front());
  for (std::size_t i = 1; i + 1 < n; ++i) s.add(g[i]);
  s.add(0.5 * g.back());
  return s.value() * dt;
}

inline bool all_finite(const std::vector<double>& v) noexcept {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

}  // namespace mlpath
