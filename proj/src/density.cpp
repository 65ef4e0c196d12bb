#include "retdist/density.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>
#include <set>

#include <fmt/format.h>

#include "retdist/errors.hpp"
#include "retdist/numeric.hpp"

namespace retdist {

namespace {

// Largest quarter-integer order handled by the repeated-multiplication path.
constexpr int kMaxQuarterSteps = 64;

std::vector<double> make_edges(BinMode mode, int bins, double lo, double hi) {
  std::vector<double> edges(static_cast<std::size_t>(bins) + 1);
  const auto nb = static_cast<double>(bins);
  if (mode == BinMode::linear) {
    for (int i = 0; i <= bins; ++i) edges[static_cast<std::size_t>(i)] = lo + (hi - lo) * (i / nb);
  } else {
    const double llo = std::log(lo);
    const double lhi = std::log(hi);
    for (int i = 0; i <= bins; ++i) edges[static_cast<std::size_t>(i)] = std::exp(llo + (lhi - llo) * (i / nb));
  }
  edges.front() = lo;
  edges.back() = hi;
  return edges;
}

bool quarter_grid(std::span<const double> orders, int& max_steps) {
  max_steps = 0;
  for (double k : orders) {
    const double q = k * 4.0;
    if (q != std::floor(q) || q > kMaxQuarterSteps) return false;
    max_steps = std::max(max_steps, static_cast<int>(q));
  }
  return true;
}

}  // namespace

void BinningSpec::validate() const {
  if (bin_count < 4) throw ArgumentError("bin_count must be >= 4");
  if (range) {
    if (!(range->lo < range->hi)) throw ArgumentError("binning range needs lo < hi");
    if (mode == BinMode::logarithmic && !(range->lo > 0.0))
      throw ArgumentError("logarithmic binning needs a positive lower bound");
  }
}

double EmpiricalDensity::integral() const {
  long double s = 0;
  for (std::size_t i = 0; i < density.size(); ++i) s += static_cast<long double>(density[i]) * widths[i];
  return static_cast<double>(s);
}

std::string_view to_string(TailSign sign) { return sign == TailSign::positive ? "positive" : "negative"; }

std::uint64_t EmpiricalCcdf::count_at_or_above(std::size_t i) const {
  return static_cast<std::uint64_t>(std::llround(ccdf.at(i) * static_cast<double>(n_tail)));
}

bool MomentSet::all_finite() const {
  return std::all_of(mu.begin(), mu.end(), [](double v) { return std::isfinite(v); });
}

EmpiricalDensity estimate_pdf(std::span<const double> x, const BinningSpec& spec) {
  spec.validate();
  if (x.size() < static_cast<std::size_t>(spec.bin_count))
    throw ArgumentError("need at least bin_count samples");

  double lo = 0.0;
  double hi = 0.0;
  if (spec.range) {
    lo = spec.range->lo;
    hi = spec.range->hi;
  } else {
    bool any = false;
    for (double v : x) {
      if (!std::isfinite(v) || (spec.mode == BinMode::logarithmic && v <= 0.0)) continue;
      if (!any) {
        lo = hi = v;
        any = true;
      }
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    if (!any) throw DegenerateInputError("no samples usable for the requested binning");
    if (lo == hi) throw DegenerateInputError("all samples identical; cannot infer a binning range");
  }

  EmpiricalDensity d;
  d.edges = make_edges(spec.mode, spec.bin_count, lo, hi);
  const auto nb = static_cast<std::size_t>(spec.bin_count);
  d.counts.assign(nb, 0);
  d.n_total = x.size();

  const double llo = std::log(lo > 0.0 ? lo : 1.0);
  const double inv_step = spec.mode == BinMode::linear ? static_cast<double>(nb) / (hi - lo)
                                                       : static_cast<double>(nb) / (std::log(hi) - llo);
  for (double v : x) {
    if (!(v >= lo && v <= hi)) continue;
    const double pos = spec.mode == BinMode::linear ? (v - lo) * inv_step : (std::log(v) - llo) * inv_step;
    auto idx = static_cast<std::size_t>(std::clamp(pos, 0.0, static_cast<double>(nb - 1)));
    while (idx > 0 && v < d.edges[idx]) --idx;
    while (idx + 1 < nb && v >= d.edges[idx + 1]) ++idx;
    ++d.counts[idx];
  }

  d.centers.resize(nb);
  d.widths.resize(nb);
  d.density.resize(nb);
  const auto n = static_cast<double>(d.n_total);
  for (std::size_t i = 0; i < nb; ++i) {
    const double a = d.edges[i];
    const double b = d.edges[i + 1];
    d.centers[i] = spec.mode == BinMode::linear ? 0.5 * (a + b) : std::sqrt(a * b);
    d.widths[i] = b - a;
    d.density[i] = static_cast<double>(d.counts[i]) / (n * d.widths[i]);
  }
  return d;
}

EmpiricalDensity estimate_pdf(const ReturnSeries& r, const BinningSpec& spec) {
  return estimate_pdf(std::span<const double>(r.values), spec);
}

P0Estimate pdf_at_zero(const EmpiricalDensity& d) {
  const auto& e = d.edges;
  if (e.size() < 2 || !(e.front() <= 0.0 && 0.0 <= e.back())) throw ArgumentError("no bin contains 0");
  const auto n = static_cast<double>(d.n_total);
  auto single = [&](std::size_t i) {
    const auto c = static_cast<double>(d.counts[i]);
    return P0Estimate{d.density[i], std::sqrt(c) / (n * d.widths[i])};
  };
  const std::size_t nb = d.bins();
  if (e.back() == 0.0) return single(nb - 1);
  const auto it = std::upper_bound(e.begin(), e.end(), 0.0);
  const auto i = static_cast<std::size_t>(it - e.begin()) - 1;
  if (i > 0 && e[i] == 0.0) {
    const auto c = static_cast<double>(d.counts[i - 1] + d.counts[i]);
    const double w = d.widths[i - 1] + d.widths[i];
    return P0Estimate{c / (n * w), std::sqrt(c) / (n * w)};
  }
  return single(i);
}

BinningSpec central_binning(std::span<const double> x, double width_in_scales) {
  if (!(width_in_scales > 0.0)) throw ArgumentError("central bin width must be positive");
  double scale = robust_scale(x);
  if (!(scale > 0.0)) scale = population_stddev(x);
  if (!(scale > 0.0)) throw DegenerateInputError("cannot size a central bin for constant data");
  const double w = width_in_scales * scale;
  return BinningSpec{BinMode::linear, 5, BinRange{-2.5 * w, 2.5 * w}};
}

P0Estimate estimate_p0(std::span<const double> x, double width_in_scales) {
  return pdf_at_zero(estimate_pdf(x, central_binning(x, width_in_scales)));
}

std::vector<double> tail_values(std::span<const double> x, TailSign sign) {
  std::vector<double> out;
  for (double v : x) {
    if (sign == TailSign::positive && v > 0.0) out.push_back(v);
    if (sign == TailSign::negative && v < 0.0) out.push_back(-v);
  }
  std::sort(out.begin(), out.end());
  return out;
}

EmpiricalCcdf ccdf_tail(std::span<const double> x, TailSign sign) {
  EmpiricalCcdf c;
  c.tail_sign = sign;
  c.values = tail_values(x, sign);
  c.n_tail = c.values.size();
  c.thin = c.n_tail < 100;
  c.ccdf.resize(c.values.size());
  const auto n = static_cast<double>(c.n_tail);
  std::size_t first = 0;
  for (std::size_t i = 0; i < c.values.size(); ++i) {
    if (i > 0 && c.values[i] != c.values[i - 1]) first = i;
    c.ccdf[i] = static_cast<double>(c.n_tail - first) / n;
  }
  return c;
}

EmpiricalCcdf ccdf_tail(const ReturnSeries& r, TailSign sign) {
  return ccdf_tail(std::span<const double>(r.values), sign);
}

MomentSet sample_moments(std::span<const double> x, std::span<const double> orders) {
  for (double k : orders) {
    if (!(k >= 0.0) || !std::isfinite(k)) throw ArgumentError("moment orders must be finite and >= 0");
  }
  if (x.empty()) throw ArgumentError("moments of an empty sample");
  MomentSet m;
  m.orders.assign(orders.begin(), orders.end());
  m.mu.assign(orders.size(), 0.0);
  const auto n = static_cast<long double>(x.size());

  int steps = 0;
  if (quarter_grid(orders, steps)) {
    std::vector<long double> sums(static_cast<std::size_t>(steps) + 1, 0.0L);
    for (double v : x) {
      const double q = std::sqrt(std::sqrt(std::abs(v)));
      double p = 1.0;
      for (int s = 1; s <= steps; ++s) {
        p *= q;
        sums[static_cast<std::size_t>(s)] += p;
      }
    }
    for (std::size_t j = 0; j < orders.size(); ++j) {
      const auto s = static_cast<std::size_t>(orders[j] * 4.0);
      m.mu[j] = s == 0 ? 1.0 : static_cast<double>(sums[s] / n);
    }
    return m;
  }
  for (std::size_t j = 0; j < orders.size(); ++j) {
    if (orders[j] == 0.0) {
      m.mu[j] = 1.0;
      continue;
    }
    long double s = 0;
    for (double v : x) s += std::pow(std::abs(v), orders[j]);
    m.mu[j] = static_cast<double>(s / n);
  }
  return m;
}

MomentSet sample_moments(const ReturnSeries& r, std::span<const double> orders) {
  if (r.kind != ReturnKind::normalized) throw ArgumentError("sample_moments expects normalized returns");
  return sample_moments(std::span<const double>(r.values), orders);
}

MomentSet gaussian_moments(std::span<const double> orders) {
  MomentSet m;
  m.orders.assign(orders.begin(), orders.end());
  for (double k : orders) {
    if (!(k >= 0.0) || !std::isfinite(k)) throw ArgumentError("moment orders must be finite and >= 0");
    m.mu.push_back(std::pow(2.0, k / 2.0) * std::tgamma((k + 1.0) / 2.0) / std::sqrt(std::numbers::pi));
  }
  return m;
}

std::vector<double> default_moment_orders() {
  std::vector<double> k;
  for (int i = 1; i <= 16; ++i) k.push_back(0.25 * i);
  return k;
}

void write_density(std::ostream& out, const EmpiricalDensity& d, const std::string& header) {
  out << "# " << header << "\n";
  out << fmt::format("# n_total={} bins={} in_range_fraction={}\n", d.n_total, d.bins(), d.integral());
  out << "center\tlo\thi\twidth\tcount\tdensity\n";
  for (std::size_t i = 0; i < d.bins(); ++i) {
    out << fmt::format("{}\t{}\t{}\t{}\t{}\t{}\n", d.centers[i], d.edges[i], d.edges[i + 1], d.widths[i], d.counts[i],
                       d.density[i]);
  }
}

void write_ccdf(std::ostream& out, const EmpiricalCcdf& c, const std::string& header, std::size_t max_rows) {
  out << "# " << header << "\n";
  out << fmt::format("# sign={} n_tail={} thin={}\n", to_string(c.tail_sign), c.n_tail, c.thin);
  out << "value\tccdf\tcount\n";
  const std::size_t n = c.values.size();
  std::set<std::size_t> keep;
  if (n <= max_rows) {
    for (std::size_t i = 0; i < n; ++i) keep.insert(i);
  } else {
    // log-spaced in rank counted from the largest value
    const double ln = std::log(static_cast<double>(n));
    for (std::size_t j = 0; j < max_rows; ++j) {
      const double from_top = std::exp(ln * static_cast<double>(j) / static_cast<double>(max_rows - 1));
      const auto r = std::min(n, static_cast<std::size_t>(std::llround(from_top)));
      keep.insert(n - r);
    }
  }
  for (const auto i : keep) out << fmt::format("{}\t{}\t{}\n", c.values[i], c.ccdf[i], c.count_at_or_above(i));
}

}  // namespace retdist
