#include "retdist/fitting.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <ostream>

#include <boost/math/distributions/binomial.hpp>
#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <fmt/format.h>

#include "retdist/numeric.hpp"
#include "retdist/parallel.hpp"
#include "retdist/synth.hpp"

namespace retdist {

namespace {

constexpr int kMinTailPoints = 10;
constexpr double kFlagRatio = 1.0 / 3.0;
constexpr double kFlagWeight = 0.1;

struct LogFit {
  FitResult result;
  double rss = 0.0;
  double tss = 0.0;
};

// Weighted ln y on ln x over the in-range points.
LogFit loglog_core(std::span<const double> x, std::span<const double> y, std::optional<std::span<const double>> yerr,
                   FitRange range) {
  if (x.size() != y.size()) throw ArgumentError("x and y differ in length");
  if (yerr && yerr->size() != x.size()) throw ArgumentError("yerr and x differ in length");
  if (!(range.lo <= range.hi)) throw ArgumentError("fit range must satisfy lo <= hi");

  // Errors are only usable when every in-range point carries one.
  bool weighted = yerr.has_value();
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!range.contains(x[i])) continue;
    if (!(x[i] > 0.0) || !(y[i] > 0.0)) throw ArgumentError("log-log fit needs positive x and y in range");
    idx.push_back(i);
    if (weighted && !((*yerr)[i] > 0.0 && std::isfinite((*yerr)[i]))) weighted = false;
  }
  if (idx.size() < 3) throw ArgumentError(fmt::format("log-log fit needs >= 3 points in range, got {}", idx.size()));

  std::vector<double> lx, ly, w;
  lx.reserve(idx.size());
  ly.reserve(idx.size());
  LogFit out;
  for (std::size_t i : idx) {
    lx.push_back(std::log(x[i]));
    ly.push_back(std::log(y[i]));
    if (weighted) {
      const double rel = (*yerr)[i] / y[i];
      double wi = 1.0 / (rel * rel);
      if (rel >= kFlagRatio) {
        wi *= kFlagWeight;
        ++out.result.flagged_points;
      }
      w.push_back(wi);
    }
  }
  const LineFit line = fit_line(lx, ly, w);
  auto& r = out.result;
  r.slope = line.slope;
  r.slope_std_error = line.slope_std_error;
  r.estimate = line.slope;
  r.std_error = line.slope_std_error;
  r.intercept = line.intercept;
  r.residual_rms = line.residual_rms;
  r.n_points = line.n;
  r.range = FitRange{x[idx.front()], x[idx.front()]};
  for (std::size_t i : idx) {
    r.range.lo = std::min(r.range.lo, x[i]);
    r.range.hi = std::max(r.range.hi, x[i]);
  }
  out.rss = line.rss;
  out.tss = line.tss;
  return out;
}

void split_curve(std::span<const P0Point> curve, std::vector<double>& dt, std::vector<double>& p0,
                 std::vector<double>& se) {
  dt.clear();
  p0.clear();
  se.clear();
  for (const auto& p : curve) {
    dt.push_back(p.dt);
    p0.push_back(p.p0);
    se.push_back(p.std_error);
  }
}

std::optional<std::span<const double>> errors_or_none(const std::vector<double>& se) {
  const bool any = std::any_of(se.begin(), se.end(), [](double s) { return s > 0.0; });
  if (!any) return std::nullopt;
  return std::span<const double>(se);
}

// Residuals below the rounding floor carry no information about a break.
double improvement_ratio(double rss_one, double rss_two, double tss) {
  const double floor = 1e-20 * tss;
  if (rss_two + floor > 0.0) return (rss_one + floor) / (rss_two + floor);
  return 1.0;
}

// Number of tail samples with magnitude inside the range.
std::uint64_t samples_in_range(const EmpiricalCcdf& tail, FitRange range) {
  const auto lo = std::lower_bound(tail.values.begin(), tail.values.end(), range.lo);
  const auto hi = std::upper_bound(tail.values.begin(), tail.values.end(), range.hi);
  return hi > lo ? static_cast<std::uint64_t>(hi - lo) : 0;
}

// ---------------------------------------------------------------------------
// Student's t likelihood in standardized coordinates theta = (ln nu, ln s, mu)

struct TState {
  double theta[3] = {0.0, 0.0, 0.0};
  double f = 0.0;  // minus mean log-likelihood
  double g[3] = {0.0, 0.0, 0.0};
};

void t_evaluate(std::span<const double> z, TState& st) {
  const long double nu = std::exp(static_cast<long double>(st.theta[0]));
  const long double s = std::exp(static_cast<long double>(st.theta[1]));
  const long double mu = st.theta[2];
  long double sum_l1 = 0.0L;
  long double sum_wz = 0.0L;
  long double sum_wz2 = 0.0L;
  for (double xi : z) {
    const long double u = (xi - mu) / s;
    const long double u2 = u * u;
    const long double w = (nu + 1.0L) / (nu + u2);
    sum_l1 += std::log1p(u2 / nu);
    sum_wz += w * u;
    sum_wz2 += w * u2;
  }
  const long double n = static_cast<long double>(z.size());
  const long double m_l1 = sum_l1 / n;
  const long double m_wz = sum_wz / n;
  const long double m_wz2 = sum_wz2 / n;

  // ln Gamma((nu+1)/2) - ln Gamma(nu/2) without cancellation at large nu
  const long double lg_ratio =
      -std::log(boost::math::tgamma_delta_ratio(static_cast<long double>(nu / 2.0L), 0.5L));
  const long double ll = lg_ratio - 0.5L * std::log(nu * std::numbers::pi_v<long double>) - std::log(s) -
                         0.5L * (nu + 1.0L) * m_l1;
  const long double dpsi = boost::math::digamma((nu + 1.0L) / 2.0L) - boost::math::digamma(nu / 2.0L);
  const long double d_nu = 0.5L * dpsi - 0.5L / nu - 0.5L * m_l1 + 0.5L * m_wz2 / nu;

  st.f = static_cast<double>(-ll);
  st.g[0] = static_cast<double>(-(nu * d_nu));
  st.g[1] = static_cast<double>(-(-1.0L + m_wz2));
  st.g[2] = static_cast<double>(-(m_wz / s));
}

struct TRun {
  TState state;
  int iterations = 0;
  bool converged = false;
};

double projected_norm(const TState& st, double a_lo, double a_hi) {
  double m = 0.0;
  for (int k = 0; k < 3; ++k) {
    double gk = st.g[k];
    if (k == 0 && st.theta[0] >= a_hi && gk < 0.0) gk = 0.0;
    if (k == 0 && st.theta[0] <= a_lo && gk > 0.0) gk = 0.0;
    m = std::max(m, std::abs(gk));
  }
  return m;
}

// Quasi-Newton descent on f with Armijo backtracking: f never increases.
TRun t_bfgs(std::span<const double> z, double nu0, const StudentTOptions& opts) {
  const double a_lo = std::log(0.05);
  const double a_hi = std::log(opts.nu_max);
  TRun run;
  TState& cur = run.state;
  cur.theta[0] = std::clamp(std::log(nu0), a_lo, a_hi);
  cur.theta[1] = 0.0;
  cur.theta[2] = 0.0;
  t_evaluate(z, cur);

  double H[3][3] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
  auto reset = [&H] {
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) H[i][j] = i == j ? 1.0 : 0.0;
  };

  for (run.iterations = 0; run.iterations < opts.max_iterations; ++run.iterations) {
    if (projected_norm(cur, a_lo, a_hi) < opts.gradient_tolerance) {
      run.converged = true;
      return run;
    }
    // nu pinned at a bound and pushing outward: freeze that coordinate
    const bool pinned = (cur.theta[0] >= a_hi && cur.g[0] < 0.0) || (cur.theta[0] <= a_lo && cur.g[0] > 0.0);
    double d[3];
    for (int i = 0; i < 3; ++i) d[i] = -(H[i][0] * cur.g[0] + H[i][1] * cur.g[1] + H[i][2] * cur.g[2]);
    if (pinned) d[0] = 0.0;
    double slope = d[0] * cur.g[0] + d[1] * cur.g[1] + d[2] * cur.g[2];
    if (!(slope < 0.0)) {
      reset();
      for (int i = 0; i < 3; ++i) d[i] = -cur.g[i];
      if (pinned) d[0] = 0.0;
      slope = d[0] * cur.g[0] + d[1] * cur.g[1] + d[2] * cur.g[2];
    }
    const double dmax = std::max({std::abs(d[0]), std::abs(d[1]), std::abs(d[2])});
    if (dmax > 1.0) {
      for (double& di : d) di /= dmax;
      slope /= dmax;
    }

    TState next;
    bool accepted = false;
    for (double t = 1.0; t > 1e-12; t *= 0.5) {
      next.theta[0] = std::clamp(cur.theta[0] + t * d[0], a_lo, a_hi);
      next.theta[1] = cur.theta[1] + t * d[1];
      next.theta[2] = cur.theta[2] + t * d[2];
      t_evaluate(z, next);
      if (std::isfinite(next.f) && next.f <= cur.f + 1e-4 * t * slope) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      bool identity = true;
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) identity = identity && H[i][j] == (i == j ? 1.0 : 0.0);
      if (identity) return run;
      reset();
      continue;
    }

    double s[3], y[3];
    for (int i = 0; i < 3; ++i) {
      s[i] = next.theta[i] - cur.theta[i];
      y[i] = next.g[i] - cur.g[i];
    }
    const double sy = s[0] * y[0] + s[1] * y[1] + s[2] * y[2];
    const double ss = std::sqrt(s[0] * s[0] + s[1] * s[1] + s[2] * s[2]);
    const double yy = std::sqrt(y[0] * y[0] + y[1] * y[1] + y[2] * y[2]);
    if (sy > 1e-12 * ss * yy) {
      double Hy[3];
      for (int i = 0; i < 3; ++i) Hy[i] = H[i][0] * y[0] + H[i][1] * y[1] + H[i][2] * y[2];
      const double yHy = y[0] * Hy[0] + y[1] * Hy[1] + y[2] * Hy[2];
      const double rho = 1.0 / sy;
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
          H[i][j] += rho * ((1.0 + rho * yHy) * s[i] * s[j] - (Hy[i] * s[j] + s[i] * Hy[j]));
    }
    cur = next;
  }
  run.converged = projected_norm(cur, a_lo, a_hi) < opts.gradient_tolerance;
  return run;
}

}  // namespace

// ---------------------------------------------------------------------------
// Linear and log-log fits

LineFit fit_line(std::span<const double> x, std::span<const double> y, std::span<const double> w) {
  if (x.size() != y.size() || (!w.empty() && w.size() != x.size()))
    throw ArgumentError("fit_line: mismatched input lengths");
  if (x.size() < 2) throw ArgumentError("fit_line needs >= 2 points");
  auto weight = [&w](std::size_t i) { return w.empty() ? 1.0L : static_cast<long double>(w[i]); };

  long double sw = 0.0L, sx = 0.0L, sy = 0.0L;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sw += weight(i);
    sx += weight(i) * x[i];
    sy += weight(i) * y[i];
  }
  const long double mx = sx / sw;
  const long double my = sy / sw;
  long double sxx = 0.0L, sxy = 0.0L;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const long double dx = x[i] - mx;
    sxx += weight(i) * dx * dx;
    sxy += weight(i) * dx * (y[i] - my);
  }
  if (!(sxx > 0.0L)) throw ArgumentError("fit_line needs at least two distinct x values");

  LineFit f;
  f.n = static_cast<int>(x.size());
  const long double slope = sxy / sxx;
  const long double intercept = my - slope * mx;
  long double rss = 0.0L, sq = 0.0L, tss = 0.0L;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const long double r = y[i] - (intercept + slope * x[i]);
    rss += weight(i) * r * r;
    sq += r * r;
    tss += weight(i) * (y[i] - my) * (y[i] - my);
  }
  f.slope = static_cast<double>(slope);
  f.intercept = static_cast<double>(intercept);
  f.rss = static_cast<double>(rss);
  f.tss = static_cast<double>(tss);
  f.residual_rms = static_cast<double>(std::sqrt(sq / static_cast<long double>(x.size())));
  f.slope_std_error =
      x.size() > 2 ? static_cast<double>(std::sqrt(rss / static_cast<long double>(x.size() - 2) / sxx)) : 0.0;
  return f;
}

FitResult loglog_fit(std::span<const double> x, std::span<const double> y, std::optional<std::span<const double>> yerr,
                     FitRange range) {
  return loglog_core(x, y, yerr, range).result;
}

FitResult alpha_from_p0_scaling(std::span<const P0Point> curve, FitRange range) {
  std::vector<double> dt, p0, se;
  split_curve(curve, dt, p0, se);
  FitResult r = loglog_fit(dt, p0, errors_or_none(se), range);
  if (!(r.slope < 0.0))
    throw InvalidScalingError(fmt::format("P(0) slope {} is not negative; no stability index", r.slope));
  r.estimate = -1.0 / r.slope;
  r.std_error = r.slope_std_error / (r.slope * r.slope);
  r.convention = "alpha";
  return r;
}

// ---------------------------------------------------------------------------
// Crossover

CrossoverResult detect_crossover(std::span<const P0Point> curve) {
  const std::size_t n = curve.size();
  if (n < 8) throw ArgumentError(fmt::format("crossover detection needs >= 8 points, got {}", n));
  for (std::size_t i = 1; i < n; ++i)
    if (!(curve[i].dt > curve[i - 1].dt)) throw ArgumentError("crossover curve must be strictly increasing in dt");
  if (!(curve.front().dt > 0.0) || curve.back().dt / curve.front().dt < 10.0)
    throw ArgumentError("crossover curve must span at least one decade of dt");

  std::vector<double> dt, p0, se;
  split_curve(curve, dt, p0, se);
  const auto err = errors_or_none(se);
  const FitRange all{dt.front(), dt.back()};
  const LogFit global = loglog_core(dt, p0, err, all);

  constexpr std::size_t kMinSegment = 4;
  CrossoverResult best;
  double best_rss = std::numeric_limits<double>::infinity();
  bool found = false;
  for (std::size_t split = kMinSegment - 1; split + kMinSegment < n; ++split) {
    const LogFit left = loglog_core(dt, p0, err, FitRange{dt.front(), dt[split]});
    const LogFit right = loglog_core(dt, p0, err, FitRange{dt[split + 1], dt.back()});
    const double rss = left.rss + right.rss;
    if (rss < best_rss) {
      best_rss = rss;
      best.left = left.result;
      best.right = right.result;
      best.split = split;
      found = true;
    }
  }
  if (!found) throw ArgumentError("no crossover candidate leaves >= 4 points on each side");

  const double a = std::log(dt[best.split]);
  const double b = std::log(dt[best.split + 1]);
  const double dslope = best.left.slope - best.right.slope;
  double lb = 0.5 * (a + b);
  if (dslope != 0.0) {
    const double cross = (best.right.intercept - best.left.intercept) / dslope;
    if (std::isfinite(cross)) lb = std::clamp(cross, a, b);
  }
  best.breakpoint = std::exp(lb);
  best.improvement = improvement_ratio(global.rss, best_rss, global.tss);
  return best;
}

CrossoverCalibration calibrate_crossover_threshold(std::span<const P0Point> curve, int trials, std::uint64_t seed,
                                                   double quantile, double confidence) {
  if (trials < 20) throw ArgumentError("calibration needs >= 20 trials");
  if (!(quantile > 0.0 && quantile < 1.0) || !(confidence > 0.0 && confidence < 1.0))
    throw ArgumentError("quantile and confidence must lie in (0, 1)");

  std::vector<double> rel(curve.size(), 0.0);
  for (std::size_t i = 0; i < curve.size(); ++i)
    rel[i] = curve[i].p0 > 0.0 && curve[i].std_error > 0.0 ? curve[i].std_error / curve[i].p0 : 0.0;
  if (std::all_of(rel.begin(), rel.end(), [](double r) { return r == 0.0; }))
    throw ArgumentError("calibration needs P(0) standard errors");

  std::vector<double> ratios(static_cast<std::size_t>(trials));
  std::vector<P0Point> synthetic(curve.begin(), curve.end());
  for (int t = 0; t < trials; ++t) {
    CounterRng rng(seed, static_cast<std::uint64_t>(t));
    for (std::size_t i = 0; i < synthetic.size(); ++i) {
      // the ratio is invariant to the true line, so any slope will do
      synthetic[i].p0 = std::exp(-0.6 * std::log(curve[i].dt) + rel[i] * rng.normal());
      synthetic[i].std_error = rel[i] * synthetic[i].p0;
    }
    ratios[static_cast<std::size_t>(t)] = detect_crossover(synthetic).improvement;
  }
  std::sort(ratios.begin(), ratios.end());

  // smallest j with P(Binom(trials, q) <= j) >= confidence; X_(j+1) bounds the quantile
  const boost::math::binomial_distribution<double> binom(trials, quantile);
  auto j = static_cast<std::size_t>(std::floor(trials * quantile));
  while (j + 1 < ratios.size() && boost::math::cdf(binom, static_cast<double>(j)) < confidence) ++j;

  CrossoverCalibration c;
  c.threshold = ratios[j];
  c.trials = trials;
  c.quantile = quantile;
  c.confidence = confidence;
  return c;
}

// ---------------------------------------------------------------------------
// Tails

FitRange default_tail_range(const EmpiricalCcdf& tail, double fraction, std::size_t min_points) {
  if (tail.values.empty()) throw ArgumentError("empty tail");
  if (!(fraction > 0.0 && fraction <= 1.0)) throw ArgumentError("tail fraction must lie in (0, 1]");
  auto k = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(tail.n_tail)));
  k = std::min<std::size_t>(std::max(k, min_points), tail.values.size());
  return FitRange{tail.values[tail.values.size() - k], tail.values.back()};
}

EmpiricalDensity tail_density(const EmpiricalCcdf& tail, FitRange range, int bins) {
  const auto lo = std::lower_bound(tail.values.begin(), tail.values.end(), range.lo);
  const auto hi = std::upper_bound(tail.values.begin(), tail.values.end(), range.hi);
  if (hi <= lo) throw ArgumentError("no tail samples inside the range");
  BinningSpec spec;
  spec.mode = BinMode::logarithmic;
  spec.bin_count = bins;
  spec.range = BinRange{range.lo, range.hi};
  return estimate_pdf(std::span<const double>(&*lo, static_cast<std::size_t>(hi - lo)), spec);
}

FitResult powerlaw_tail_fit(const EmpiricalCcdf& tail, FitRange range) {
  std::vector<double> x, y, e;
  for (std::size_t i = 0; i < tail.values.size(); ++i) {
    if (!range.contains(tail.values[i])) continue;
    const double count = static_cast<double>(tail.count_at_or_above(i));
    x.push_back(tail.values[i]);
    y.push_back(tail.ccdf[i]);
    e.push_back(tail.ccdf[i] / std::sqrt(count));
  }
  if (x.size() < static_cast<std::size_t>(kMinTailPoints))
    throw ArgumentError(fmt::format("tail fit needs >= {} points in range, got {}", kMinTailPoints, x.size()));
  FitResult r = loglog_fit(x, y, std::span<const double>(e), range);
  r.estimate = -r.slope;
  // cumulative points are correlated; never report less than the sampling bound
  const double k = static_cast<double>(samples_in_range(tail, range));
  r.std_error = std::max(r.slope_std_error, std::abs(r.estimate) / std::sqrt(k));
  r.convention = "ccdf";
  return r;
}

FitResult powerlaw_tail_fit(const EmpiricalDensity& tail, FitRange range) {
  std::vector<double> x, y, e;
  for (std::size_t i = 0; i < tail.bins(); ++i) {
    if (!range.contains(tail.centers[i]) || tail.counts[i] == 0) continue;
    x.push_back(tail.centers[i]);
    y.push_back(tail.density[i]);
    e.push_back(tail.density[i] / std::sqrt(static_cast<double>(tail.counts[i])));
  }
  if (x.size() < static_cast<std::size_t>(kMinTailPoints))
    throw ArgumentError(fmt::format("tail fit needs >= {} non-empty bins in range, got {}", kMinTailPoints, x.size()));
  FitResult r = loglog_fit(x, y, std::span<const double>(e), range);
  r.estimate = -r.slope - 1.0;
  r.std_error = r.slope_std_error;
  r.convention = "pdf";
  return r;
}

FitResult exponential_tail_fit(const EmpiricalCcdf& tail, FitRange range) {
  std::vector<double> x, y, w;
  FitResult r;
  for (std::size_t i = 0; i < tail.values.size(); ++i) {
    if (!range.contains(tail.values[i])) continue;
    if (!(tail.ccdf[i] > 0.0)) throw ArgumentError("exponential fit needs positive CCDF values");
    const double count = static_cast<double>(tail.count_at_or_above(i));
    x.push_back(tail.values[i]);
    y.push_back(std::log(tail.ccdf[i]));
    double wi = count;
    if (1.0 / std::sqrt(count) >= kFlagRatio) {
      wi *= kFlagWeight;
      ++r.flagged_points;
    }
    w.push_back(wi);
  }
  if (x.size() < static_cast<std::size_t>(kMinTailPoints))
    throw ArgumentError(fmt::format("tail fit needs >= {} points in range, got {}", kMinTailPoints, x.size()));
  const LineFit line = fit_line(x, y, w);
  r.slope = line.slope;
  r.slope_std_error = line.slope_std_error;
  r.intercept = line.intercept;
  r.estimate = -line.slope;
  const double k = static_cast<double>(samples_in_range(tail, range));
  r.std_error = std::max(line.slope_std_error, std::abs(r.estimate) / std::sqrt(k));
  r.residual_rms = line.residual_rms;
  r.n_points = line.n;
  r.range = FitRange{x.front(), x.back()};
  r.convention = "exponential";
  return r;
}

// ---------------------------------------------------------------------------
// Student's t

double student_t_loglik(std::span<const double> x, double nu, double scale, double location) {
  if (!(nu > 0.0) || !(scale > 0.0)) throw ArgumentError("t log-likelihood needs nu > 0 and scale > 0");
  const long double lnorm = -std::log(boost::math::tgamma_delta_ratio(static_cast<long double>(nu) / 2.0L, 0.5L)) -
                            0.5L * std::log(static_cast<long double>(nu) * std::numbers::pi_v<long double>) -
                            std::log(static_cast<long double>(scale));
  long double sum = 0.0L;
  for (double xi : x) {
    const long double u = (xi - location) / static_cast<long double>(scale);
    sum += std::log1p(u * u / nu);
  }
  return static_cast<double>(static_cast<long double>(x.size()) * lnorm - 0.5L * (nu + 1.0L) * sum);
}

StudentTFit student_t_fit(std::span<const double> x, const StudentTOptions& opts) {
  if (x.size() < 1000) throw ArgumentError(fmt::format("t fit needs >= 1000 samples, got {}", x.size()));
  if (opts.start_nu.empty()) throw ArgumentError("t fit needs at least one starting nu");
  for (double v : x)
    if (!std::isfinite(v)) throw DataError("t fit input contains non-finite values");

  const double center = quantile(x, 0.5);
  const double spread = robust_scale(x);
  if (!(spread > 0.0)) throw DegenerateInputError("t fit input has zero spread");
  std::vector<double> z(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) z[i] = (x[i] - center) / spread;

  std::vector<TRun> runs(opts.start_nu.size());
  parallel_for(runs.size(), opts.threads, [&](std::size_t i) { runs[i] = t_bfgs(z, opts.start_nu[i], opts); });

  auto to_fit = [&](const TRun& run) {
    StudentTFit f;
    f.nu = std::exp(run.state.theta[0]);
    f.scale = spread * std::exp(run.state.theta[1]);
    f.location = center + spread * run.state.theta[2];
    f.log_likelihood = -static_cast<double>(x.size()) * (run.state.f + std::log(spread));
    f.iterations = run.iterations;
    return f;
  };

  // best likelihood; near-ties go to the lowest nu
  auto better = [](const TRun& a, const TRun& b) {
    const double tol = 1e-12 * std::max(1.0, std::abs(b.state.f));
    if (a.state.f < b.state.f - tol) return true;
    if (a.state.f > b.state.f + tol) return false;
    return a.state.theta[0] < b.state.theta[0];
  };
  const TRun* best_converged = nullptr;
  const TRun* best_any = nullptr;
  for (const auto& run : runs) {
    if (!best_any || better(run, *best_any)) best_any = &run;
    if (run.converged && (!best_converged || better(run, *best_converged))) best_converged = &run;
  }
  if (!best_converged)
    throw ConvergenceError(fmt::format("t fit did not reach gradient norm {} within {} iterations",
                                       opts.gradient_tolerance, opts.max_iterations),
                           to_fit(*best_any));
  if (better(*best_any, *best_converged)) {
    throw ConvergenceError("t fit: the best likelihood came from a start that did not converge", to_fit(*best_any));
  }
  return to_fit(*best_converged);
}

StudentTFit student_t_fit(const ReturnSeries& r, const StudentTOptions& opts) { return student_t_fit(r.values, opts); }

// ---------------------------------------------------------------------------
// Averaging and reporting

Estimate weighted_average(std::span<const Estimate> estimates) {
  if (estimates.empty()) throw ArgumentError("weighted average of an empty list");
  if (estimates.size() == 1) return estimates.front();
  long double sw = 0.0L, swx = 0.0L;
  for (const auto& e : estimates) {
    if (!(e.std_error > 0.0) || !std::isfinite(e.std_error))
      throw ArgumentError("weighted average needs positive standard errors");
    const long double w = 1.0L / (static_cast<long double>(e.std_error) * e.std_error);
    sw += w;
    swx += w * e.value;
  }
  return Estimate{static_cast<double>(swx / sw), static_cast<double>(std::sqrt(1.0L / sw))};
}

std::string format_estimate(double value, double std_error) {
  if (!(std_error > 0.0) || !std::isfinite(std_error)) return fmt::format("{:.6g} ± {}", value, std_error);
  const int decimals = std::clamp(static_cast<int>(-std::floor(std::log10(std_error))), 0, 12);
  return fmt::format("{:.{}f} ± {:.{}f}", value, decimals, std_error, decimals);
}

void write_fit_report(std::ostream& out, std::span<const NamedFit> fits) {
  out << "name\testimate\tstd_error\trange_lo\trange_hi\tn_points\tresidual_rms\tflagged\tconvention\tformatted\n";
  for (const auto& [name, f] : fits) {
    out << fmt::format("{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n", name, f.estimate, f.std_error, f.range.lo,
                       f.range.hi, f.n_points, f.residual_rms, f.flagged_points, f.convention,
                       format_estimate(f.estimate, f.std_error));
  }
}

}  // namespace retdist
