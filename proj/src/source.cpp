#include "nlhelm/source.hpp"

#include <cmath>

#include "nlhelm/quadrature.hpp"

namespace nlhelm {

namespace {
constexpr double kNegligibleEFolds = 36.841361487904734;  // ln(1e16)
}

Source Source::gaussian(double amplitude, double rate) {
  if (!(rate > 0.0)) throw ConfigError("gaussian source rate must be positive");
  Source s;
  s.kind = Kind::Gaussian;
  s.amplitude = amplitude;
  s.rate = rate;
  return s;
}

double Source::operator()(const Point2& x) const {
  switch (kind) {
    case Kind::Zero: return 0.0;
    case Kind::Gaussian: {
      const double r2 = x[0] * x[0] + x[1] * x[1];
      if (r2 > support_radius() * support_radius()) return 0.0;
      return amplitude * std::exp(-rate * rate * r2);
    }
    case Kind::Custom: return custom(x);
  }
  return 0.0;
}

double Source::support_radius() const {
  switch (kind) {
    case Kind::Zero: return 0.0;
    case Kind::Gaussian: return std::sqrt(kNegligibleEFolds) / rate;
    case Kind::Custom: return custom_support;
  }
  return 0.0;
}

double Source::l2_norm_1d(double l) const {
  if (kind == Kind::Zero) return 0.0;
  if (kind == Kind::Gaussian) {
    const double a = std::min(l, support_radius());
    // integral of A^2 exp(-2 r^2 x^2) over [-a, a]
    const double r = rate * std::sqrt(2.0);
    return std::abs(amplitude) * std::sqrt(std::sqrt(kPi) / r * std::erf(r * a));
  }
  auto f2 = [&](double x) {
    const double v = (*this)(x);
    return v * v;
  };
  quad::Options opt;
  opt.rel_tol = 1e-12;
  return std::sqrt(quad::integrate(f2, -l, l, opt).value);
}

}  // namespace nlhelm
