#include "retdist/convergence.hpp"

#include <cmath>
#include <ostream>

#include <fmt/format.h>

#include "retdist/errors.hpp"
#include "retdist/parallel.hpp"

namespace retdist {

double moment_distance(const MomentSet& data, const MomentSet& reference) {
  if (data.orders != reference.orders || data.mu.size() != data.orders.size() ||
      reference.mu.size() != reference.orders.size())
    throw ArgumentError("moment sets are on different order grids");
  if (data.orders.empty()) throw ArgumentError("empty moment grid");
  if (!data.all_finite() || !reference.all_finite()) throw ArgumentError("non-finite moment");
  long double sum = 0.0L;
  for (std::size_t i = 0; i < data.mu.size(); ++i) {
    const long double d = static_cast<long double>(data.mu[i]) - reference.mu[i];
    sum += d * d;
  }
  return static_cast<double>(std::sqrt(sum / static_cast<long double>(data.mu.size())));
}

std::vector<SpeedPoint> convergence_speed(std::span<const DistancePoint> curve) {
  if (curve.size() < 2) throw ArgumentError("convergence speed needs >= 2 points");
  std::vector<SpeedPoint> out;
  out.reserve(curve.size() - 1);
  for (std::size_t i = 0; i + 1 < curve.size(); ++i) {
    const double gap = curve[i + 1].dt - curve[i].dt;
    if (gap == 0.0) throw ArgumentError(fmt::format("duplicate dt {}", curve[i].dt));
    if (gap < 0.0) throw ArgumentError("dt values must be strictly increasing");
    out.push_back({0.5 * (curve[i].dt + curve[i + 1].dt), (curve[i + 1].distance - curve[i].distance) / gap});
  }
  return out;
}

ConvergenceCurve convergence_curve(const std::map<int, ReturnSeries>& series_by_dt, std::span<const double> orders,
                                   int threads) {
  if (series_by_dt.empty()) throw ArgumentError("no series to evaluate");
  std::vector<const ReturnSeries*> series;
  ConvergenceCurve c;
  for (const auto& [dt, r] : series_by_dt) {
    if (r.kind != ReturnKind::normalized) throw ArgumentError(fmt::format("series at dt={} is not normalized", dt));
    c.dts.push_back(dt);
    series.push_back(&r);
  }
  const MomentSet reference = gaussian_moments(orders);
  c.moments.resize(series.size());
  c.distances.resize(series.size());
  parallel_for(series.size(), threads, [&](std::size_t i) {
    c.moments[i] = sample_moments(*series[i], orders);
    c.distances[i] = moment_distance(c.moments[i], reference);
  });
  if (c.dts.size() > 1) {
    std::vector<DistancePoint> pts;
    for (std::size_t i = 0; i < c.dts.size(); ++i) pts.push_back({c.dts[i], c.distances[i]});
    for (const auto& s : convergence_speed(pts)) {
      c.speed_midpoints.push_back(s.dt_mid);
      c.speeds.push_back(s.speed);
    }
  }
  return c;
}

void write_distance_table(std::ostream& out, const ConvergenceCurve& c) {
  out << "dt\tD\n";
  for (std::size_t i = 0; i < c.dts.size(); ++i) out << fmt::format("{}\t{}\n", c.dts[i], c.distances[i]);
}

void write_speed_table(std::ostream& out, const ConvergenceCurve& c) {
  out << "dt_mid\tv\n";
  for (std::size_t i = 0; i < c.speeds.size(); ++i) out << fmt::format("{}\t{}\n", c.speed_midpoints[i], c.speeds[i]);
}

void write_moment_table(std::ostream& out, const ConvergenceCurve& c) {
  if (c.moments.empty()) return;
  const auto& orders = c.moments.front().orders;
  const MomentSet reference = gaussian_moments(orders);
  out << "k";
  for (double dt : c.dts) out << fmt::format("\tdt={}", dt);
  out << "\tgaussian\n";
  for (std::size_t k = 0; k < orders.size(); ++k) {
    out << fmt::format("{}", orders[k]);
    for (const auto& m : c.moments) out << fmt::format("\t{}", m.mu[k]);
    out << fmt::format("\t{}\n", reference.mu[k]);
  }
}

}  // namespace retdist
