#pragma once

#include <cmath>
#include <map>
#include <string>

#include "mlpath/numeric.hpp"

namespace mlpath {

// Extended-real functional value with labeled addends, so every formula term
// (tilt, half norm, correction, membership barrier) stays auditable.
// value == sum of components when all are finite; +inf iff any component is.
struct FunctionalValue {
  double value = 0.0;
  std::map<std::string, double> components;

  FunctionalValue() = default;

  static FunctionalValue from_components(std::map<std::string, double> parts) {
    FunctionalValue out;
    out.components = std::move(parts);
    double sum = 0.0;
    bool infinite = false;
    for (const auto& [name, v] : out.components) {
      if (std::isinf(v))
        infinite = true;
      else
        sum += v;
    }
    out.value = infinite ? kInf : sum;
    return out;
  }

  // Sum of the finite components; the analytic continuation past the
  // Cameron-Martin barrier, used by gap identities.
  double finite_part() const {
    double sum = 0.0;
    for (const auto& [name, v] : components)
      if (!std::isinf(v)) sum += v;
    return sum;
  }

  bool is_infinite() const noexcept { return std::isinf(value); }
};

inline const char* kCmBarrier = "cm_barrier";

}  // namespace mlpath
