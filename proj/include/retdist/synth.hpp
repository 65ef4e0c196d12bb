#pragma once

// Seed-deterministic generators with known ground truth. They are the
// independent oracle for every estimator in the library.

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "retdist/market_data.hpp"

namespace retdist {

/// SplitMix64 evaluated on a counter. Streams are derived from (seed, stream)
/// so block-parallel generation is independent of the thread count.
class CounterRng {
 public:
  using result_type = std::uint64_t;
  static constexpr std::string_view algorithm = "splitmix64-counter";

  explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0);

  std::uint64_t operator()();
  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  /// Uniform on the open interval (0, 1).
  double uniform();
  double normal();
  double exponential();
  /// Gamma(shape, 1).
  double gamma(double shape);

 private:
  std::uint64_t state_;
  double spare_normal_ = 0.0;
  bool has_spare_ = false;
};

struct GaussianSpec {
  double mean = 0.0;
  double sd = 1.0;
};
/// Symmetric stable with characteristic function exp(-gamma dt |q|^alpha).
struct StableSpec {
  double alpha = 2.0;
  double gamma = 1.0;
  double dt = 1.0;
};
struct StudentTSpec {
  double nu = 3.0;
  double scale = 1.0;
  double location = 0.0;
};
struct ExponentialSpec {
  double rate = 1.0;
};
/// CCDF (x / x_min)^{-exponent} for x >= x_min. Symmetric draws carry a
/// random sign, so each tail holds half the mass.
struct ParetoSpec {
  double x_min = 1.0;
  double exponent = 3.0;
  bool symmetric = false;
};
struct LaplaceSpec {
  double scale = 1.0;
};

using FamilyParams = std::variant<GaussianSpec, StableSpec, StudentTSpec, ExponentialSpec, ParetoSpec, LaplaceSpec>;

struct GeneratorSpec {
  FamilyParams params;
  std::uint64_t seed = 0;
  std::size_t n = 0;
};

std::string_view family_name(const FamilyParams& params);
/// e.g. "stable alpha=1.5 gamma=1 dt=1"
std::string describe(const FamilyParams& params);
/// Inverse of describe(); unspecified keys keep their defaults.
FamilyParams parse_family(std::string_view text);
/// Throws ArgumentError when parameters leave the family's domain.
void validate(const GeneratorSpec& spec);

/// Draw spec.n values. Output depends only on the spec, not on `threads`.
/// Throws GenerationError if any draw overflows.
std::vector<double> sample(const GeneratorSpec& spec, int threads = 1);

/// Scale that gives a t(nu) law unit standard deviation (nu > 2).
double t_scale_for_unit_std(double nu);

/// Prices S_0 = s0, S_t = s0 exp(sum of the first t returns), laid on the
/// trading-minute axis of `cal` starting at the first session of `start`.
PriceSeries price_path(std::span<const double> returns, double s0, const TradingCalendar& cal = {},
                       Date start = Date{std::chrono::year{2005} / 1 / 4});

/// Non-overlapping dt-sums of consecutive base returns, for each dt.
std::map<int, std::vector<double>> aggregate_ladder(std::span<const double> base, std::span<const int> dts);

void write_sample(std::ostream& out, const GeneratorSpec& spec, std::span<const double> values);

}  // namespace retdist
