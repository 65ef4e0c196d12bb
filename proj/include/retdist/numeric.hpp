#pragma once

// Small descriptive-statistics helpers shared across modules.

#include <span>
#include <vector>

namespace retdist {

double mean(std::span<const double> x);
double population_stddev(std::span<const double> x, double mean);
double population_stddev(std::span<const double> x);

/// Linear-interpolation quantile (type 7) of unsorted data; p in [0,1].
double quantile(std::span<const double> x, double p);
double quantile_sorted(std::span<const double> sorted, double p);

/// Interquartile range divided by 1.349: equals sigma for Gaussian data and
/// stays finite for heavy-tailed samples.
double robust_scale(std::span<const double> x);

}  // namespace retdist
