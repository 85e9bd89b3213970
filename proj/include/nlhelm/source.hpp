#pragma once

#include <functional>

#include "nlhelm/types.hpp"

namespace nlhelm {

/// Right-hand side f. Gaussian sources f(x) = amplitude * exp(-rate^2 |x|^2)
/// are treated as supported in the ball where they exceed 1e-16 of their peak.
struct Source {
  enum class Kind { Zero, Gaussian, Custom };

  Kind kind = Kind::Zero;
  double amplitude = 0.0;
  double rate = 1.0;
  std::function<double(const Point2&)> custom;  // Kind::Custom, 1D uses x[0]
  double custom_support = 0.0;

  static Source zero() { return {}; }
  static Source gaussian(double amplitude, double rate);

  double operator()(double x) const { return (*this)(Point2{x, 0.0}); }
  double operator()(const Point2& x) const;

  /// Radius of the ball outside which the source is treated as zero.
  double support_radius() const;
  bool is_zero() const { return kind == Kind::Zero || (kind == Kind::Gaussian && amplitude == 0.0); }

  /// ||f||_{L2} over [-l, l] (1D) in closed form.
  double l2_norm_1d(double l) const;
};

}  // namespace nlhelm
