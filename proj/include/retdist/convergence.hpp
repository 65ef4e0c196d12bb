#pragma once

// Moment distance D between normalized returns and the standard normal, and
// its difference quotient v across horizons.

#include <iosfwd>
#include <map>
#include <span>
#include <vector>

#include "retdist/density.hpp"
#include "retdist/returns.hpp"

namespace retdist {

struct DistancePoint {
  double dt = 0.0;
  double distance = 0.0;
};

struct SpeedPoint {
  double dt_mid = 0.0;
  double speed = 0.0;
};

struct ConvergenceCurve {
  std::vector<double> dts;
  std::vector<double> distances;
  /// speeds[i] is the forward difference between dts[i] and dts[i+1].
  std::vector<double> speeds;
  std::vector<double> speed_midpoints;
  /// Sample moments behind each distance, aligned with dts.
  std::vector<MomentSet> moments;
};

/// RMS difference of two moment sets on the same order grid.
double moment_distance(const MomentSet& data, const MomentSet& reference);

/// (D_{i+1} - D_i) / (dt_{i+1} - dt_i), reported at the interval midpoint.
std::vector<SpeedPoint> convergence_speed(std::span<const DistancePoint> curve);

/// Series must be normalized; evaluation per dt runs on `threads` workers.
ConvergenceCurve convergence_curve(const std::map<int, ReturnSeries>& series_by_dt, std::span<const double> orders,
                                   int threads = 1);

void write_distance_table(std::ostream& out, const ConvergenceCurve& c);
void write_speed_table(std::ostream& out, const ConvergenceCurve& c);
/// One row per order, one column per dt, plus the Gaussian reference.
void write_moment_table(std::ostream& out, const ConvergenceCurve& c);

}  // namespace retdist
