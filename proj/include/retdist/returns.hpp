#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string_view>
#include <vector>

#include "retdist/market_data.hpp"

namespace retdist {

enum class ReturnKind { raw, normalized, rescaled };

std::string_view to_string(ReturnKind kind);

/// Log returns at a fixed horizon.
///
/// `mean_T` and `volatility` cache the full-sample mean and population
/// standard deviation of `values`. `tick_index[i]` is the starting tick of
/// the window behind `values[i]` (empty for series built from bare values).
struct ReturnSeries {
  int dt_minutes = 1;
  std::vector<double> values;
  ReturnKind kind = ReturnKind::raw;
  double mean_T = 0.0;
  double volatility = 0.0;
  std::vector<std::int64_t> tick_index;

  std::size_t size() const { return values.size(); }

  static ReturnSeries from_values(std::vector<double> values, int dt_minutes,
                                  ReturnKind kind = ReturnKind::raw);
};

struct ReturnOptions {
  /// Windows start at every tick; otherwise on a dt-spaced grid.
  bool overlapping = true;
  /// Drop windows whose endpoints lie in different session instances.
  bool exclude_stitch_spanning = false;
};

ReturnSeries log_returns(const PriceSeries& s, int dt, const ReturnOptions& opts = {});

/// r -> (r - <r>_T) / V with V the population standard deviation.
ReturnSeries normalize(const ReturnSeries& r);

/// Multiply by dt^(-1/alpha); dt must equal r.dt_minutes.
ReturnSeries rescale(const ReturnSeries& r, double alpha, int dt);

struct ShapeTestResult {
  double statistic = 0.0;
  double p_value = 1.0;
  double sample_skewness = 0.0;
  double sample_excess_kurtosis = 0.0;
};

/// D'Agostino transformed-skewness z test (n >= 8).
ShapeTestResult skewness_test(std::span<const double> x);
ShapeTestResult skewness_test(const ReturnSeries& r);

/// Anscombe-Glynn kurtosis z test (n >= 20).
ShapeTestResult kurtosis_test(std::span<const double> x);
ShapeTestResult kurtosis_test(const ReturnSeries& r);

void write_return_series(std::ostream& out, const ReturnSeries& r);

}  // namespace retdist
