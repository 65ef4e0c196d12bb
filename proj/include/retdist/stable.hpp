#pragma once

// Symmetric Levy alpha-stable law with characteristic function
// exp(-gamma * dt * |q|^alpha): density by quadrature, closed-form P(0),
// scale inversion and the dt-collapse transform.

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>

#include "retdist/density.hpp"

namespace retdist {

class StableParams {
 public:
  /// Throws ArgumentError unless 0 < alpha <= 2 and gamma > 0.
  StableParams(double alpha, double gamma);

  double alpha() const { return alpha_; }
  double gamma() const { return gamma_; }

 private:
  double alpha_;
  double gamma_;
};

struct StableQuadratureOptions {
  /// At or above this alpha the Gaussian closed form is used.
  double gaussian_switch_alpha = 2.0;
  /// Integration stops where exp(-gamma dt q^alpha) drops below this.
  double envelope_cutoff = 1e-16;
  /// Accuracy is guaranteed for |R| <= guaranteed_range * (gamma dt)^{1/alpha}.
  double guaranteed_range = 50.0;
  std::size_t max_panels = 200000;
};

struct StablePdfValue {
  double density = 0.0;
  bool accuracy_degraded = false;
};

StablePdfValue stable_pdf(const StableParams& p, double dt, double R, const StableQuadratureOptions& opts = {});

/// Gamma(1/alpha) / (pi alpha (gamma dt)^{1/alpha})
double stable_p0(const StableParams& p, double dt);

/// Inverse of stable_p0 in gamma.
double gamma_from_p0(double alpha, double dt, double p0);

/// Map a density at horizon dt onto the dt = 1 axis: R_s = R dt^{-1/alpha},
/// P_s = P dt^{1/alpha}. The integral is unchanged.
EmpiricalDensity collapse_density(const EmpiricalDensity& d, double alpha, double dt);

/// (R, density) table for overlay plotting.
void write_stable_curve(std::ostream& out, const StableParams& p, double dt, std::span<const double> grid,
                        const std::string& header);

}  // namespace retdist
