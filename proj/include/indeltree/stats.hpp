#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>

namespace indeltree::stats {

struct Interval {
  double estimate = 0;
  double lower = 0;
  double upper = 1;
};

/// Wilson score interval for a binomial proportion; z = 3 by default.
inline Interval wilson(std::size_t successes, std::size_t trials, double z = 3.0) {
  if (trials == 0) return {0.0, 0.0, 1.0};
  const double n = static_cast<double>(trials);
  const double p = static_cast<double>(successes) / n;
  const double z2 = z * z;
  const double centre = (p + z2 / (2 * n)) / (1 + z2 / n);
  const double half = z * std::sqrt(p * (1 - p) / n + z2 / (4 * n * n)) / (1 + z2 / n);
  return {p, std::max(0.0, centre - half), std::min(1.0, centre + half)};
}

inline double log_choose(std::size_t n, std::size_t k) {
  return std::lgamma(static_cast<double>(n) + 1) - std::lgamma(static_cast<double>(k) + 1) -
         std::lgamma(static_cast<double>(n - k) + 1);
}

inline double binomial_pmf(std::size_t n, std::size_t k, double p) {
  if (k > n) return 0.0;
  if (p <= 0.0) return k == 0 ? 1.0 : 0.0;
  if (p >= 1.0) return k == n ? 1.0 : 0.0;
  return std::exp(log_choose(n, k) + static_cast<double>(k) * std::log(p) +
                  static_cast<double>(n - k) * std::log1p(-p));
}

/// P[Bin(n, p) >= k].
inline double binomial_upper_tail(std::size_t n, double p, std::size_t k) {
  double s = 0;
  for (std::size_t i = k; i <= n; ++i) s += binomial_pmf(n, i, p);
  return std::min(1.0, s);
}

}  // namespace indeltree::stats
