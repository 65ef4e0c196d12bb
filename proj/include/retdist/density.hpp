#pragma once

// Empirical side of every figure: binned PDFs, rank-based tail CCDFs, the
// zero-return density P(0), and absolute moments.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "retdist/returns.hpp"

namespace retdist {

enum class BinMode { linear, logarithmic };

struct BinRange {
  double lo = 0.0;
  double hi = 0.0;
};

struct BinningSpec {
  BinMode mode = BinMode::linear;
  int bin_count = 100;
  std::optional<BinRange> range;

  /// Throws ArgumentError unless bin_count >= 4, lo < hi, and lo > 0 for log bins.
  void validate() const;
};

struct EmpiricalDensity {
  std::vector<double> edges;    // bin_count + 1
  std::vector<double> centers;  // arithmetic (linear) or geometric (log) midpoints
  std::vector<double> widths;
  std::vector<double> density;
  std::vector<std::uint64_t> counts;
  std::uint64_t n_total = 0;

  std::size_t bins() const { return centers.size(); }
  /// Sum of density * width, i.e. the in-range sample fraction.
  double integral() const;
};

enum class TailSign { positive, negative };

std::string_view to_string(TailSign sign);

struct EmpiricalCcdf {
  std::vector<double> values;  // ascending magnitudes
  std::vector<double> ccdf;    // fraction of tail samples >= value
  TailSign tail_sign = TailSign::positive;
  std::uint64_t n_tail = 0;
  /// Fewer than 100 tail samples: usable, but fits will be noisy.
  bool thin = false;

  /// Number of tail samples at or beyond values[i].
  std::uint64_t count_at_or_above(std::size_t i) const;
};

struct MomentSet {
  std::vector<double> orders;
  std::vector<double> mu;

  bool all_finite() const;
};

EmpiricalDensity estimate_pdf(std::span<const double> x, const BinningSpec& spec);
EmpiricalDensity estimate_pdf(const ReturnSeries& r, const BinningSpec& spec);

struct P0Estimate {
  double p0 = 0.0;
  double std_error = 0.0;
};

/// Density of the bin containing 0 with Poisson error sqrt(count)/(n*width).
/// If 0 sits exactly on an interior edge the two neighbouring bins are merged.
P0Estimate pdf_at_zero(const EmpiricalDensity& d);

/// Linear spec whose central bin is centred on 0 with width
/// `width_in_scales` times the robust scale of `x`.
BinningSpec central_binning(std::span<const double> x, double width_in_scales = 0.1);

/// pdf_at_zero(estimate_pdf(x, central_binning(x, width_in_scales))).
P0Estimate estimate_p0(std::span<const double> x, double width_in_scales = 0.1);

EmpiricalCcdf ccdf_tail(std::span<const double> x, TailSign sign);
EmpiricalCcdf ccdf_tail(const ReturnSeries& r, TailSign sign);

/// Tail magnitudes (positive samples, or |negative samples|), ascending.
std::vector<double> tail_values(std::span<const double> x, TailSign sign);

/// Absolute moments (1/n) sum |r_i|^k; r must be normalized.
MomentSet sample_moments(const ReturnSeries& r, std::span<const double> orders);
MomentSet sample_moments(std::span<const double> x, std::span<const double> orders);

/// Absolute moments of the standard normal, 2^{k/2} Gamma((k+1)/2) / sqrt(pi).
MomentSet gaussian_moments(std::span<const double> orders);

/// {0.25, 0.5, ..., 4.0}
std::vector<double> default_moment_orders();

// Plot-data tables (tab-separated with '#' header lines).
void write_density(std::ostream& out, const EmpiricalDensity& d, const std::string& header);
/// Writes at most `max_rows` points, thinned to log-spaced ranks.
void write_ccdf(std::ostream& out, const EmpiricalCcdf& c, const std::string& header, std::size_t max_rows = 2000);

}  // namespace retdist
