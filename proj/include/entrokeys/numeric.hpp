#pragma once

#include <cmath>

namespace entrokeys {

/// Overflow-safe logistic function.
inline double logistic(double x) noexcept {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace entrokeys
