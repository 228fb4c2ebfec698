#pragma once

#include <cmath>
#include <numbers>

namespace shrinkdetect {

// Standard normal density, cdf and upper tail. Tails go through erfc so that
// Phi(-z) keeps full relative accuracy for large z.

inline double normal_pdf(double z) {
  return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
}

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

inline double normal_upper_tail(double z) { return 0.5 * std::erfc(z / std::numbers::sqrt2); }

}  // namespace shrinkdetect
