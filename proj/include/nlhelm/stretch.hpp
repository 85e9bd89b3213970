#pragma once

#include "nlhelm/types.hpp"

namespace nlhelm {

enum class RampKind { LinearNormalized };

/// Absorption coefficient sigma(t): zero for |t| <= inner_extent, then the
/// normalized linear ramp (|t| - inner_extent) / pml_width, continued past
/// the outer PML edge.
struct AbsorptionProfile {
  double inner_extent = 1.0;
  double pml_width = 1.0;
  RampKind ramp = RampKind::LinearNormalized;

  double sigma(double t) const;
  bool operator==(const AbsorptionProfile&) const = default;
  /// Closed-form integral of sigma from 0 to x (odd in x).
  double integral(double x) const;
};

struct StretchConfig {
  cplx z{0.0, 1.0};
  double k = 1.0;
  AbsorptionProfile profile;

  /// Requires Im(z) > 0, Re(z) >= 0 and k > 0.
  void validate() const;
  bool operator==(const StretchConfig&) const = default;
};

struct Stretch1D {
  cplx x_tilde;
  cplx alpha;
};

struct Stretch2D {
  CPoint2 x_tilde;
  cplx jacobian;
};

Stretch1D stretch_1d(const StretchConfig& cfg, double x);
Stretch2D stretch_2d_cartesian(const StretchConfig& cfg_x1, const StretchConfig& cfg_x2,
                               const Point2& x);
Stretch2D stretch_2d_polar(const StretchConfig& cfg, const Point2& x);

/// eta(x) = |integral_0^x sigma|.
double eta(const AbsorptionProfile& profile, double x);

enum class PmlStyle { None, Cartesian, Polar };

/// Coordinate map used by assembly. `None` is the identity; in 1D only
/// `None` and `Cartesian` are meaningful and `x1` carries the stretch.
struct PmlSetup {
  PmlStyle style = PmlStyle::None;
  StretchConfig x1;
  StretchConfig x2;

  Stretch1D map(double x) const;
  Stretch2D map(const Point2& x) const;
};

}  // namespace nlhelm
