#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>

namespace dpcvm::links {

// Linear indices are clamped to this range before any link evaluation.
inline constexpr double index_bound = 35.0;
// Phi rounds to 1 beyond about 8.3, so probit indices use a narrower range
// to keep both probabilities inside (0, 1).
inline constexpr double probit_index_bound = 8.0;

inline double clamp_index(double z) {
  return std::clamp(z, -index_bound, index_bound);
}

inline double clamp_probit_index(double z) {
  return std::clamp(z, -probit_index_bound, probit_index_bound);
}

inline double logistic(double z) {
  z = clamp_index(z);
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// d/dz logistic(z) = logistic(z) * (1 - logistic(z)).
inline double logistic_density(double z) {
  z = clamp_index(z);
  const double e = std::exp(-std::abs(z));
  return e / ((1.0 + e) * (1.0 + e));
}

// d^2/dz^2 logistic(z).
inline double logistic_density_slope(double z) {
  const double p = logistic(z);
  return logistic_density(z) * (1.0 - 2.0 * p);
}

inline double normal_cdf(double z) {
  z = clamp_probit_index(z);
  return 0.5 * std::erfc(-z * std::numbers::sqrt2 / 2.0);
}

inline double normal_pdf(double z) {
  z = clamp_probit_index(z);
  return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
}

}  // namespace dpcvm::links
