#pragma once

#include <array>
#include <complex>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>

#include "nlhelm/types.hpp"

namespace nlhelm {

enum class KernelFamily {
  Exponential1D,
  Exponential2D,
  PiecewiseConstant1D,
  PiecewiseConstant2D,
  Fractional1D,
  Fractional2D,
};

std::string_view to_string(KernelFamily family);

/// Radial nonlocal kernel gamma(x, y) = gamma_r(|x - y|).
///
/// Families and normalizations:
///   Exponential1D        exp(-|s|/c) / (2 c^3)
///   Exponential2D        exp(-|s|/c) / (3 pi c^4)
///   PiecewiseConstant1D  3 / delta^3 * chi(|s| / delta)
///   PiecewiseConstant2D  8 / (pi delta^4) * chi(|s| / delta)
///   Fractional1D         C(s) |s|^{-1-2s}
///   Fractional2D         C(2,s) |s|^{-2-2s}
///
/// The indicator chi is replaced by its smoothed sigmoid form when `smoothed`
/// is set, and always when the argument is complex.
struct KernelSpec {
  KernelFamily family = KernelFamily::Exponential1D;
  double c_gamma = 0.0;
  double delta = 0.0;
  double s_order = 0.0;
  double smoothing_tol = 0.01;
  double smoothing_eps0 = 0.01;
  bool smoothed = true;
  /// Real-separation cutoff. Zero selects the family default: the radius where
  /// an exponential kernel falls below 1e-16 of its peak, the (smoothed) edge
  /// of a piecewise constant kernel, and infinity for fractional kernels.
  double truncation_radius = 0.0;

  static KernelSpec exponential(int dim, double c_gamma);
  static KernelSpec piecewise_constant(int dim, double delta, bool smoothed = true);
  static KernelSpec fractional(int dim, double s, double truncation_radius = 0.0);

  int dimension() const;
  bool is_fractional() const;
  bool is_exponential() const;
  bool is_piecewise_constant() const;

  /// Normalization constant in front of the radial profile.
  double constant() const;

  /// Real separation beyond which the kernel is identically zero.
  double horizon() const;

  /// Characteristic length used for quadrature scaling.
  double length_scale() const;

  /// Throws std::invalid_argument when parameters are out of range.
  void validate() const;
};

/// Fractional Laplacian normalization C(s) (1D) and C(2, s) (2D).
double fractional_constant(int dim, double s);

/// Smoothed indicator of [-1, 1] evaluated at a (possibly complex) distance.
double smooth_indicator(double s, double tol, double eps0);
cplx smooth_indicator(cplx s, double tol, double eps0);

/// Radial profile at a continued distance `dist` without horizon cutoff.
cplx eval_radial(const KernelSpec& kernel, cplx dist);

/// Continued distance: principal square root of the sum of squared components.
cplx continued_distance(std::span<const cplx> delta);

/// gamma evaluated at a complex displacement. Returns exactly zero for real
/// displacements beyond the horizon.
cplx eval_complex(const KernelSpec& kernel, std::span<const cplx> delta);
cplx eval_complex(const KernelSpec& kernel, cplx delta);

/// gamma at a real displacement.
double eval_real(const KernelSpec& kernel, std::span<const double> delta);
double eval_real(const KernelSpec& kernel, double delta);

/// (1/2) * integral of s_1^2 gamma(s) ds, computed numerically.
double second_moment(const KernelSpec& kernel);

/// Mass of the kernel outside the ball of the given radius (inside the horizon).
double tail_mass(const KernelSpec& kernel, double radius);

}  // namespace nlhelm
