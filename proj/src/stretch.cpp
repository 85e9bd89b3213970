#include "nlhelm/stretch.hpp"

#include <cmath>
#include <stdexcept>

namespace nlhelm {

double AbsorptionProfile::sigma(double t) const {
  const double a = std::abs(t);
  if (a <= inner_extent) return 0.0;
  return (a - inner_extent) / pml_width;
}

double AbsorptionProfile::integral(double x) const {
  const double a = std::abs(x);
  if (a <= inner_extent) return 0.0;
  const double d = a - inner_extent;
  const double value = 0.5 * d * d / pml_width;
  return x < 0.0 ? -value : value;
}

void StretchConfig::validate() const {
  if (!(z.imag() > 0.0)) throw ConfigError("PML coefficient requires Im(z) > 0");
  if (z.real() < 0.0) throw ConfigError("PML coefficient requires Re(z) >= 0");
  if (!(k > 0.0)) throw ConfigError("wavenumber must be positive");
  if (!(profile.pml_width > 0.0) || !(profile.inner_extent > 0.0))
    throw ConfigError("absorption profile needs positive extents");
}

Stretch1D stretch_1d(const StretchConfig& cfg, double x) {
  if (std::abs(x) <= cfg.profile.inner_extent) return {x, 1.0};
  const cplx scale = cfg.z / cfg.k;
  return {x + scale * cfg.profile.integral(x), 1.0 + scale * cfg.profile.sigma(x)};
}

Stretch2D stretch_2d_cartesian(const StretchConfig& cfg_x1, const StretchConfig& cfg_x2,
                               const Point2& x) {
  const Stretch1D s1 = stretch_1d(cfg_x1, x[0]);
  const Stretch1D s2 = stretch_1d(cfg_x2, x[1]);
  return {{s1.x_tilde, s2.x_tilde}, s1.alpha * s2.alpha};
}

Stretch2D stretch_2d_polar(const StretchConfig& cfg, const Point2& x) {
  const double r = std::hypot(x[0], x[1]);
  if (r <= cfg.profile.inner_extent) return {{x[0], x[1]}, 1.0};
  const Stretch1D radial = stretch_1d(cfg, r);
  const cplx beta = radial.x_tilde / r;
  return {{beta * x[0], beta * x[1]}, radial.alpha * beta};
}

double eta(const AbsorptionProfile& profile, double x) { return std::abs(profile.integral(x)); }

Stretch1D PmlSetup::map(double x) const {
  if (style == PmlStyle::None) return {x, 1.0};
  return stretch_1d(x1, x);
}

Stretch2D PmlSetup::map(const Point2& x) const {
  switch (style) {
    case PmlStyle::None: return {{x[0], x[1]}, 1.0};
    case PmlStyle::Cartesian: return stretch_2d_cartesian(x1, x2, x);
    case PmlStyle::Polar: return stretch_2d_polar(x1, x);
  }
  throw std::logic_error("unknown PML style");
}

}  // namespace nlhelm
