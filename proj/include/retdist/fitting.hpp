#pragma once

// Regression and likelihood fits: log-log scaling, two-regime crossover,
// power-law and exponential tails, Student's t MLE, inverse-variance
// averaging.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "retdist/density.hpp"
#include "retdist/errors.hpp"
#include "retdist/returns.hpp"

namespace retdist {

/// Closed interval [lo, hi] of the independent variable.
struct FitRange {
  double lo = 0.0;
  double hi = 0.0;

  bool contains(double x) const { return x >= lo && x <= hi; }
};

struct FitResult {
  double estimate = 0.0;
  double std_error = 0.0;
  FitRange range;
  int n_points = 0;
  /// RMS of unweighted residuals in the fitted (log) space.
  double residual_rms = 0.0;
  double slope = 0.0;
  double slope_std_error = 0.0;
  double intercept = 0.0;
  /// Points whose relative error was too large for log-space propagation.
  int flagged_points = 0;
  /// "slope", "alpha", "ccdf", "pdf" or "exponential".
  std::string convention = "slope";
};

/// Weighted straight-line fit y = intercept + slope x.
struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_std_error = 0.0;
  /// Weighted residual sum of squares.
  double rss = 0.0;
  double tss = 0.0;  // weighted total sum of squares about the mean
  double residual_rms = 0.0;
  int n = 0;
};

/// Weights may be empty (unit weights). Needs >= 2 points with distinct x.
LineFit fit_line(std::span<const double> x, std::span<const double> y, std::span<const double> w = {});

/// Weighted least squares of ln y on ln x over points with x in range.
/// yerr is propagated as sigma_ln = yerr / y.
FitResult loglog_fit(std::span<const double> x, std::span<const double> y, std::optional<std::span<const double>> yerr,
                     FitRange range);

struct P0Point {
  double dt = 0.0;
  double p0 = 0.0;
  double std_error = 0.0;
};

/// alpha = -1/slope of ln P(0) against ln dt.
FitResult alpha_from_p0_scaling(std::span<const P0Point> curve, FitRange range);

struct CrossoverResult {
  double breakpoint = 0.0;
  FitResult left;
  FitResult right;
  /// Weighted RSS of one global line over the best two-segment RSS (>= 1).
  double improvement = 1.0;
  /// Index of the last point of the left segment.
  std::size_t split = 0;
};

/// Two-segment log-log fit over every split leaving >= 4 points per side.
CrossoverResult detect_crossover(std::span<const P0Point> curve);

struct CrossoverCalibration {
  double threshold = 0.0;
  int trials = 0;
  double quantile = 0.95;
  double confidence = 0.99;
};

/// Improvement-ratio threshold under a single power law carrying the same
/// relative errors as `curve`. The threshold is the order statistic at the
/// one-sided `confidence` upper bound of the `quantile` null quantile.
CrossoverCalibration calibrate_crossover_threshold(std::span<const P0Point> curve, int trials, std::uint64_t seed,
                                                   double quantile = 0.95, double confidence = 0.99);

/// Power-law tail exponent in the CCDF convention (CCDF ~ r^-alpha).
FitResult powerlaw_tail_fit(const EmpiricalCcdf& tail, FitRange range);
/// From a tail density (PDF ~ r^-(1+alpha)); empty bins are skipped.
FitResult powerlaw_tail_fit(const EmpiricalDensity& tail, FitRange range);

/// [k-th largest, largest] with k = max(min_points, fraction * n_tail).
FitRange default_tail_range(const EmpiricalCcdf& tail, double fraction = 0.01, std::size_t min_points = 200);

/// Log-binned density of the tail magnitudes inside `range`.
EmpiricalDensity tail_density(const EmpiricalCcdf& tail, FitRange range, int bins = 20);

/// beta from ln CCDF = c - beta R.
FitResult exponential_tail_fit(const EmpiricalCcdf& tail, FitRange range);

struct StudentTFit {
  double nu = 0.0;
  double scale = 0.0;
  double location = 0.0;
  double log_likelihood = 0.0;
  int iterations = 0;
};

struct StudentTOptions {
  std::vector<double> start_nu = {2.0, 5.0, 30.0};
  double gradient_tolerance = 1e-8;
  int max_iterations = 500;
  double nu_max = 1e6;
  int threads = 1;
};

class ConvergenceError : public NumericError {
 public:
  ConvergenceError(const std::string& what, StudentTFit best) : NumericError(what), best_(best) {}
  const StudentTFit& best() const { return best_; }

 private:
  StudentTFit best_;
};

StudentTFit student_t_fit(std::span<const double> x, const StudentTOptions& opts = {});
StudentTFit student_t_fit(const ReturnSeries& r, const StudentTOptions& opts = {});

/// Log-likelihood of the location-scale t family.
double student_t_loglik(std::span<const double> x, double nu, double scale, double location);

struct Estimate {
  double value = 0.0;
  double std_error = 0.0;
};

/// Inverse-variance weighted mean; combined error sqrt(1 / sum(1/sigma^2)).
Estimate weighted_average(std::span<const Estimate> estimates);

/// "1.34 ± 0.03": value rounded to the first significant digit of the error.
std::string format_estimate(double value, double std_error);

struct NamedFit {
  std::string name;
  FitResult fit;
};

void write_fit_report(std::ostream& out, std::span<const NamedFit> fits);

}  // namespace retdist
