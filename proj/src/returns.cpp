#include "retdist/returns.hpp"

#include <cmath>
#include <ostream>

#include <fmt/format.h>

#include "retdist/errors.hpp"
#include "retdist/numeric.hpp"

namespace retdist {

namespace {

struct CentralMoments {
  double mean = 0.0;
  double m2 = 0.0;
  double m3 = 0.0;
  double m4 = 0.0;
};

CentralMoments central_moments(std::span<const double> x) {
  CentralMoments m;
  m.mean = mean(x);
  long double s2 = 0, s3 = 0, s4 = 0;
  for (double v : x) {
    const long double d = v - m.mean;
    const long double d2 = d * d;
    s2 += d2;
    s3 += d2 * d;
    s4 += d2 * d2;
  }
  const auto n = static_cast<long double>(x.size());
  m.m2 = static_cast<double>(s2 / n);
  m.m3 = static_cast<double>(s3 / n);
  m.m4 = static_cast<double>(s4 / n);
  return m;
}

double two_sided_normal_p(double z) { return std::erfc(std::abs(z) / std::sqrt(2.0)); }

}  // namespace

std::string_view to_string(ReturnKind kind) {
  switch (kind) {
    case ReturnKind::raw:
      return "raw";
    case ReturnKind::normalized:
      return "normalized";
    case ReturnKind::rescaled:
      return "rescaled";
  }
  return "unknown";
}

ReturnSeries ReturnSeries::from_values(std::vector<double> values, int dt_minutes, ReturnKind kind) {
  if (dt_minutes < 1) throw ArgumentError("dt_minutes must be >= 1");
  ReturnSeries r;
  r.dt_minutes = dt_minutes;
  r.kind = kind;
  r.mean_T = mean(values);
  r.volatility = population_stddev(values, r.mean_T);
  r.values = std::move(values);
  return r;
}

ReturnSeries log_returns(const PriceSeries& s, int dt, const ReturnOptions& opts) {
  if (dt < 1) throw ArgumentError("dt must be >= 1");
  if (static_cast<std::size_t>(dt) >= s.size()) throw ArgumentError("dt must be shorter than the series");

  std::vector<double> logp(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) logp[i] = std::log(s.records()[i].price);

  const auto step = static_cast<std::size_t>(dt);
  const std::size_t stride = opts.overlapping ? 1 : step;
  const auto& sessions = s.session_id();
  std::vector<double> values;
  std::vector<std::int64_t> ticks;
  values.reserve((s.size() - step) / stride + 1);
  ticks.reserve(values.capacity());
  for (std::size_t i = 0; i + step < s.size(); i += stride) {
    if (opts.exclude_stitch_spanning && sessions[i] != sessions[i + step]) continue;
    values.push_back(logp[i + step] - logp[i]);
    ticks.push_back(s.tick_index()[i]);
  }
  auto r = ReturnSeries::from_values(std::move(values), dt * s.minutes_per_tick(), ReturnKind::raw);
  r.tick_index = std::move(ticks);
  return r;
}

ReturnSeries normalize(const ReturnSeries& r) {
  if (r.kind == ReturnKind::rescaled) throw ArgumentError("normalize expects raw or normalized returns");
  if (r.values.empty()) throw DegenerateInputError("cannot normalize an empty series");
  const double m = mean(r.values);
  const double v = population_stddev(r.values, m);
  if (!(v > 0.0)) throw DegenerateInputError("zero volatility: returns are constant");
  ReturnSeries out = r;
  for (auto& x : out.values) x = (x - m) / v;
  out.kind = ReturnKind::normalized;
  out.mean_T = mean(out.values);
  out.volatility = population_stddev(out.values, out.mean_T);
  return out;
}

ReturnSeries rescale(const ReturnSeries& r, double alpha, int dt) {
  if (!(alpha > 0.0 && alpha <= 2.0)) throw ArgumentError("alpha must lie in (0, 2]");
  if (r.kind != ReturnKind::raw) throw ArgumentError("rescale expects raw returns");
  if (dt != r.dt_minutes) throw ArgumentError("dt does not match the series horizon");
  const double factor = std::pow(static_cast<double>(dt), -1.0 / alpha);
  ReturnSeries out = r;
  for (auto& x : out.values) x *= factor;
  out.kind = ReturnKind::rescaled;
  out.mean_T = r.mean_T * factor;
  out.volatility = r.volatility * factor;
  return out;
}

ShapeTestResult skewness_test(std::span<const double> x) {
  const auto n = static_cast<double>(x.size());
  if (x.size() < 8) throw ArgumentError("skewness test needs at least 8 samples");
  const auto m = central_moments(x);
  if (!(m.m2 > 0.0)) throw DegenerateInputError("skewness undefined for constant data");
  const double b1 = m.m3 / std::pow(m.m2, 1.5);

  const double y = b1 * std::sqrt((n + 1.0) * (n + 3.0) / (6.0 * (n - 2.0)));
  const double beta2 = 3.0 * (n * n + 27.0 * n - 70.0) * (n + 1.0) * (n + 3.0) /
                       ((n - 2.0) * (n + 5.0) * (n + 7.0) * (n + 9.0));
  const double w2 = -1.0 + std::sqrt(2.0 * (beta2 - 1.0));
  const double delta = 1.0 / std::sqrt(0.5 * std::log(w2));
  const double a = std::sqrt(2.0 / (w2 - 1.0));
  const double z = delta * std::asinh(y / a);

  ShapeTestResult res;
  res.statistic = z;
  res.p_value = two_sided_normal_p(z);
  res.sample_skewness = b1;
  res.sample_excess_kurtosis = m.m4 / (m.m2 * m.m2) - 3.0;
  return res;
}

ShapeTestResult skewness_test(const ReturnSeries& r) { return skewness_test(std::span<const double>(r.values)); }

ShapeTestResult kurtosis_test(std::span<const double> x) {
  const auto n = static_cast<double>(x.size());
  if (x.size() < 20) throw ArgumentError("kurtosis test needs at least 20 samples");
  const auto m = central_moments(x);
  if (!(m.m2 > 0.0)) throw DegenerateInputError("kurtosis undefined for constant data");
  const double b2 = m.m4 / (m.m2 * m.m2);

  const double expected = 3.0 * (n - 1.0) / (n + 1.0);
  const double var_b2 = 24.0 * n * (n - 2.0) * (n - 3.0) / ((n + 1.0) * (n + 1.0) * (n + 3.0) * (n + 5.0));
  const double xstd = (b2 - expected) / std::sqrt(var_b2);
  const double sqrt_beta1 = 6.0 * (n * n - 5.0 * n + 2.0) / ((n + 7.0) * (n + 9.0)) *
                            std::sqrt(6.0 * (n + 3.0) * (n + 5.0) / (n * (n - 2.0) * (n - 3.0)));
  const double a = 6.0 + 8.0 / sqrt_beta1 * (2.0 / sqrt_beta1 + std::sqrt(1.0 + 4.0 / (sqrt_beta1 * sqrt_beta1)));
  const double term1 = 1.0 - 2.0 / (9.0 * a);
  const double denom = 1.0 + xstd * std::sqrt(2.0 / (a - 4.0));
  const double term2 = std::copysign(std::cbrt((1.0 - 2.0 / a) / std::abs(denom)), denom);
  const double z = (term1 - term2) / std::sqrt(2.0 / (9.0 * a));

  ShapeTestResult res;
  res.statistic = z;
  res.p_value = two_sided_normal_p(z);
  res.sample_skewness = m.m3 / std::pow(m.m2, 1.5);
  res.sample_excess_kurtosis = b2 - 3.0;
  return res;
}

ShapeTestResult kurtosis_test(const ReturnSeries& r) { return kurtosis_test(std::span<const double>(r.values)); }

void write_return_series(std::ostream& out, const ReturnSeries& r) {
  out << fmt::format("# dt={} kind={} mean_T={} volatility={} n={}\n", r.dt_minutes, to_string(r.kind), r.mean_T,
                     r.volatility, r.values.size());
  out << "tick_index\tvalue\n";
  for (std::size_t i = 0; i < r.values.size(); ++i) {
    const auto tick = i < r.tick_index.size() ? r.tick_index[i] : static_cast<std::int64_t>(i);
    out << fmt::format("{}\t{}\n", tick, r.values[i]);
  }
}

}  // namespace retdist
