#include "retdist/stable.hpp"

#include <cmath>
#include <numbers>
#include <ostream>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <fmt/format.h>

#include "retdist/errors.hpp"

namespace retdist {

namespace {

constexpr double kPanelTolerance = 1e-14;
constexpr unsigned kPanelMaxDepth = 6;
constexpr double kMinPanelsPerEnvelope = 32.0;

void check_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha <= 2.0)) throw ArgumentError("alpha must lie in (0, 2]");
}

}  // namespace

StableParams::StableParams(double alpha, double gamma) : alpha_(alpha), gamma_(gamma) {
  check_alpha(alpha);
  if (!(gamma > 0.0) || !std::isfinite(gamma)) throw ArgumentError("gamma must be positive and finite");
}

StablePdfValue stable_pdf(const StableParams& p, double dt, double R, const StableQuadratureOptions& opts) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ArgumentError("dt must be positive");
  const double a = p.alpha();
  const double c = p.gamma() * dt;
  const double absR = std::abs(R);

  StablePdfValue out;
  out.accuracy_degraded = absR > opts.guaranteed_range * std::pow(c, 1.0 / a);

  if (a >= opts.gaussian_switch_alpha) {
    // exp(-c q^2) is the characteristic function of N(0, 2c)
    out.density = std::exp(-R * R / (4.0 * c)) / std::sqrt(4.0 * std::numbers::pi * c);
    return out;
  }

  const double q_max = std::pow(-std::log(opts.envelope_cutoff) / c, 1.0 / a);
  double h = q_max / kMinPanelsPerEnvelope;
  if (absR > 0.0) h = std::min(h, std::numbers::pi / absR);
  auto panels = static_cast<std::size_t>(std::ceil(q_max / h));
  if (panels > opts.max_panels) {
    panels = opts.max_panels;
    h = q_max / static_cast<double>(panels);
    out.accuracy_degraded = true;
  }

  auto integrand = [c, a, R](double q) { return std::exp(-c * std::pow(q, a)) * std::cos(q * R); };

  // The envelope has a q^alpha cusp at the origin; tanh-sinh absorbs it.
  static thread_local boost::math::quadrature::tanh_sinh<double> origin_rule;
  double sum = origin_rule.integrate(integrand, 0.0, h, kPanelTolerance);
  double comp = 0.0;
  for (std::size_t i = 1; i < panels; ++i) {
    const double lo = h * static_cast<double>(i);
    const double hi = std::min(q_max, lo + h);
    const double v = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(integrand, lo, hi, kPanelMaxDepth,
                                                                                   kPanelTolerance);
    // Neumaier summation
    const double t = sum + v;
    comp += std::abs(sum) >= std::abs(v) ? (sum - t) + v : (v - t) + sum;
    sum = t;
  }
  out.density = std::max(0.0, (sum + comp) / std::numbers::pi);
  return out;
}

double stable_p0(const StableParams& p, double dt) {
  if (!(dt > 0.0)) throw ArgumentError("dt must be positive");
  const double a = p.alpha();
  return std::tgamma(1.0 / a) / (std::numbers::pi * a * std::pow(p.gamma() * dt, 1.0 / a));
}

double gamma_from_p0(double alpha, double dt, double p0) {
  check_alpha(alpha);
  if (!(dt > 0.0) || !(p0 > 0.0)) throw ArgumentError("dt and p0 must be positive");
  return std::pow(std::tgamma(1.0 / alpha) / (std::numbers::pi * alpha * p0), alpha) / dt;
}

EmpiricalDensity collapse_density(const EmpiricalDensity& d, double alpha, double dt) {
  check_alpha(alpha);
  if (!(dt > 0.0)) throw ArgumentError("dt must be positive");
  const double f = std::pow(dt, -1.0 / alpha);
  EmpiricalDensity out = d;
  for (auto& e : out.edges) e *= f;
  for (auto& c : out.centers) c *= f;
  for (auto& w : out.widths) w *= f;
  for (auto& v : out.density) v /= f;
  return out;
}

void write_stable_curve(std::ostream& out, const StableParams& p, double dt, std::span<const double> grid,
                        const std::string& header) {
  out << "# " << header << "\n";
  out << fmt::format("# alpha={} gamma={} dt={}\n", p.alpha(), p.gamma(), dt);
  out << "R\tdensity\tdegraded\n";
  for (double R : grid) {
    const auto v = stable_pdf(p, dt, R);
    out << fmt::format("{}\t{}\t{}\n", R, v.density, v.accuracy_degraded ? 1 : 0);
  }
}

}  // namespace retdist
