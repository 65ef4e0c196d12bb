#include "retdist/numeric.hpp"

#include <algorithm>
#include <cmath>

#include "retdist/errors.hpp"

namespace retdist {

double mean(std::span<const double> x) {
  if (x.empty()) return 0.0;
  long double s = 0;
  for (double v : x) s += v;
  return static_cast<double>(s / static_cast<long double>(x.size()));
}

double population_stddev(std::span<const double> x, double m) {
  if (x.empty()) return 0.0;
  long double s = 0;
  for (double v : x) {
    const long double d = v - m;
    s += d * d;
  }
  return static_cast<double>(std::sqrt(s / static_cast<long double>(x.size())));
}

double population_stddev(std::span<const double> x) { return population_stddev(x, mean(x)); }

double quantile_sorted(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw ArgumentError("quantile of empty data");
  if (!(p >= 0.0 && p <= 1.0)) throw ArgumentError("quantile level must lie in [0,1]");
  const double h = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

double quantile(std::span<const double> x, double p) {
  std::vector<double> copy(x.begin(), x.end());
  std::sort(copy.begin(), copy.end());
  return quantile_sorted(copy, p);
}

double robust_scale(std::span<const double> x) {
  std::vector<double> copy(x.begin(), x.end());
  std::sort(copy.begin(), copy.end());
  return (quantile_sorted(copy, 0.75) - quantile_sorted(copy, 0.25)) / 1.3489795003921634;
}

}  // namespace retdist
