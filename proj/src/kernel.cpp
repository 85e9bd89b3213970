#include "nlhelm/kernel.hpp"

#include <cmath>
#include <limits>

#include "nlhelm/quadrature.hpp"

namespace nlhelm {

namespace {

// ln(1e16): exponential decay below this many e-folds is below double resolution.
constexpr double kNegligibleEFolds = 36.841361487904734;

constexpr double kSigmoidClamp = 700.0;

double smoothing_rate(double tol, double eps0) { return -std::log(tol) / eps0; }

cplx radial_profile(const KernelSpec& k, cplx dist, bool real_argument) {
  const double c0 = k.constant();
  switch (k.family) {
    case KernelFamily::Exponential1D:
    case KernelFamily::Exponential2D:
      return c0 * std::exp(-dist / k.c_gamma);
    case KernelFamily::PiecewiseConstant1D:
    case KernelFamily::PiecewiseConstant2D:
      if (real_argument && !k.smoothed)
        return std::abs(dist.real()) <= k.delta ? cplx(c0) : cplx(0.0);
      if (real_argument)
        return c0 * smooth_indicator(std::abs(dist.real()) / k.delta, k.smoothing_tol,
                                     k.smoothing_eps0);
      return c0 * smooth_indicator(dist / k.delta, k.smoothing_tol, k.smoothing_eps0);
    case KernelFamily::Fractional1D:
    case KernelFamily::Fractional2D: {
      if (std::abs(dist) < 1e-14)
        throw std::domain_error("fractional kernel evaluated at zero separation");
      const double p = k.dimension() + 2.0 * k.s_order;
      if (real_argument) return c0 * std::pow(std::abs(dist.real()), -p);
      return c0 * std::exp(-p * std::log(dist));
    }
  }
  return 0.0;
}

}  // namespace

std::string_view to_string(KernelFamily family) {
  switch (family) {
    case KernelFamily::Exponential1D: return "Exponential1D";
    case KernelFamily::Exponential2D: return "Exponential2D";
    case KernelFamily::PiecewiseConstant1D: return "PiecewiseConstant1D";
    case KernelFamily::PiecewiseConstant2D: return "PiecewiseConstant2D";
    case KernelFamily::Fractional1D: return "Fractional1D";
    case KernelFamily::Fractional2D: return "Fractional2D";
  }
  return "unknown";
}

KernelSpec KernelSpec::exponential(int dim, double c_gamma) {
  KernelSpec k;
  k.family = dim == 1 ? KernelFamily::Exponential1D : KernelFamily::Exponential2D;
  k.c_gamma = c_gamma;
  k.validate();
  return k;
}

KernelSpec KernelSpec::piecewise_constant(int dim, double delta, bool smoothed) {
  KernelSpec k;
  k.family = dim == 1 ? KernelFamily::PiecewiseConstant1D : KernelFamily::PiecewiseConstant2D;
  k.delta = delta;
  k.smoothed = smoothed;
  k.validate();
  return k;
}

KernelSpec KernelSpec::fractional(int dim, double s, double truncation_radius) {
  KernelSpec k;
  k.family = dim == 1 ? KernelFamily::Fractional1D : KernelFamily::Fractional2D;
  k.s_order = s;
  k.truncation_radius = truncation_radius;
  k.validate();
  return k;
}

int KernelSpec::dimension() const {
  switch (family) {
    case KernelFamily::Exponential1D:
    case KernelFamily::PiecewiseConstant1D:
    case KernelFamily::Fractional1D:
      return 1;
    default:
      return 2;
  }
}

bool KernelSpec::is_fractional() const {
  return family == KernelFamily::Fractional1D || family == KernelFamily::Fractional2D;
}

bool KernelSpec::is_exponential() const {
  return family == KernelFamily::Exponential1D || family == KernelFamily::Exponential2D;
}

bool KernelSpec::is_piecewise_constant() const {
  return family == KernelFamily::PiecewiseConstant1D ||
         family == KernelFamily::PiecewiseConstant2D;
}

double fractional_constant(int dim, double s) {
  if (dim == 1)
    return std::pow(2.0, 2.0 * s) * s * std::tgamma(s + 0.5) /
           (std::sqrt(kPi) * std::tgamma(1.0 - s));
  return std::pow(2.0, 2.0 * s) * s * std::tgamma(s + 1.0) / (kPi * std::tgamma(1.0 - s));
}

double KernelSpec::constant() const {
  switch (family) {
    case KernelFamily::Exponential1D: return 1.0 / (2.0 * std::pow(c_gamma, 3));
    case KernelFamily::Exponential2D: return 1.0 / (3.0 * kPi * std::pow(c_gamma, 4));
    case KernelFamily::PiecewiseConstant1D: return 3.0 / std::pow(delta, 3);
    case KernelFamily::PiecewiseConstant2D: return 8.0 / (kPi * std::pow(delta, 4));
    case KernelFamily::Fractional1D: return fractional_constant(1, s_order);
    case KernelFamily::Fractional2D: return fractional_constant(2, s_order);
  }
  return 0.0;
}

double KernelSpec::horizon() const {
  if (truncation_radius > 0.0) return truncation_radius;
  if (is_exponential()) return c_gamma * kNegligibleEFolds;
  if (is_piecewise_constant()) {
    if (!smoothed) return delta;
    return delta * (1.0 + kNegligibleEFolds / smoothing_rate(smoothing_tol, smoothing_eps0));
  }
  return std::numeric_limits<double>::infinity();
}

double KernelSpec::length_scale() const {
  if (is_exponential()) return c_gamma;
  if (is_piecewise_constant()) return delta;
  return 0.0;
}

void KernelSpec::validate() const {
  if (is_exponential() && !(c_gamma > 0.0))
    throw std::invalid_argument("exponential kernel requires c_gamma > 0");
  if (is_piecewise_constant()) {
    if (!(delta > 0.0)) throw std::invalid_argument("piecewise constant kernel requires delta > 0");
    if (!(smoothing_tol > 0.0 && smoothing_tol < 1.0) ||
        !(smoothing_eps0 > 0.0 && smoothing_eps0 < 1.0))
      throw std::invalid_argument("smoothing tol and eps0 must lie in (0, 1)");
  }
  if (is_fractional() && !(s_order > 0.0 && s_order < 1.0))
    throw std::invalid_argument("fractional order must lie in (0, 1)");
  if (truncation_radius < 0.0) throw std::invalid_argument("truncation radius must be >= 0");
}

double smooth_indicator(double s, double tol, double eps0) {
  const double x = smoothing_rate(tol, eps0) * (std::abs(s) - 1.0);
  if (x <= -kSigmoidClamp) return 1.0;
  if (x >= kSigmoidClamp) return 0.0;
  // 1/2 ((e^{-x} - 1)/(e^{-x} + 1) + 1) == 1 / (1 + e^{x})
  if (x > 0.0) {
    const double e = std::exp(-x);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(x));
}

cplx smooth_indicator(cplx s, double tol, double eps0) {
  const cplx x = smoothing_rate(tol, eps0) * (s - 1.0);
  if (x.real() <= -kSigmoidClamp) return 1.0;
  if (x.real() >= kSigmoidClamp) return 0.0;
  if (x.real() > 0.0) {
    const cplx e = std::exp(-x);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(x));
}

cplx continued_distance(std::span<const cplx> delta) {
  cplx sum = 0.0;
  for (const cplx& d : delta) sum += d * d;
  // Signed zero in the imaginary part would flip the branch on the negative axis.
  sum = cplx(sum.real(), sum.imag() + 0.0);
  return std::sqrt(sum);
}

cplx eval_radial(const KernelSpec& kernel, cplx dist) {
  return radial_profile(kernel, dist, false);
}

cplx eval_complex(const KernelSpec& kernel, std::span<const cplx> delta) {
  if (static_cast<int>(delta.size()) != kernel.dimension())
    throw std::invalid_argument("displacement dimension does not match kernel");
  bool real = true;
  double r2 = 0.0;
  for (const cplx& d : delta) {
    real = real && d.imag() == 0.0;
    r2 += d.real() * d.real();
  }
  if (real) {
    const double r = std::sqrt(r2);
    if (r > kernel.horizon()) return 0.0;
    return radial_profile(kernel, r, true);
  }
  return radial_profile(kernel, continued_distance(delta), false);
}

cplx eval_complex(const KernelSpec& kernel, cplx delta) {
  return eval_complex(kernel, std::span<const cplx>(&delta, 1));
}

double eval_real(const KernelSpec& kernel, std::span<const double> delta) {
  if (static_cast<int>(delta.size()) != kernel.dimension())
    throw std::invalid_argument("displacement dimension does not match kernel");
  double r2 = 0.0;
  for (double d : delta) r2 += d * d;
  const double r = std::sqrt(r2);
  if (r > kernel.horizon()) return 0.0;
  return radial_profile(kernel, r, true).real();
}

double eval_real(const KernelSpec& kernel, double delta) {
  return eval_real(kernel, std::span<const double>(&delta, 1));
}

double second_moment(const KernelSpec& kernel) {
  if (kernel.is_fractional())
    throw std::logic_error("second moment diverges for fractional kernels");
  const double horizon = kernel.horizon();
  const double scale = kernel.length_scale();
  std::vector<double> breaks;
  for (double m = 1.0; m * scale < horizon; m *= 2.0) breaks.push_back(m * scale);
  if (kernel.is_piecewise_constant()) breaks.push_back(kernel.delta);
  quad::Options opt;
  opt.rel_tol = 1e-14;
  if (kernel.dimension() == 1) {
    auto f = [&](double s) { return s * s * radial_profile(kernel, s, true).real(); };
    return quad::integrate_pieces(f, 0.0, horizon, breaks, opt).value;
  }
  auto f = [&](double r) { return r * r * r * radial_profile(kernel, r, true).real(); };
  return 0.5 * kPi * quad::integrate_pieces(f, 0.0, horizon, breaks, opt).value;
}

double tail_mass(const KernelSpec& kernel, double radius) {
  if (!(radius > 0.0)) throw std::invalid_argument("tail radius must be positive");
  const double c0 = kernel.constant();
  if (kernel.is_fractional()) {
    const double s = kernel.s_order;
    if (kernel.dimension() == 1) return c0 * std::pow(radius, -2.0 * s) / s;
    return kPi * c0 * std::pow(radius, -2.0 * s) / s;
  }
  const double horizon = kernel.horizon();
  if (radius >= horizon) return 0.0;
  if (kernel.is_exponential()) {
    const double c = kernel.c_gamma;
    if (kernel.dimension() == 1)
      return 2.0 * c0 * c * (std::exp(-radius / c) - std::exp(-horizon / c));
    return 2.0 * kPi * c0 * c *
           ((radius + c) * std::exp(-radius / c) - (horizon + c) * std::exp(-horizon / c));
  }
  std::vector<double> breaks{kernel.delta};
  quad::Options opt;
  opt.rel_tol = 1e-13;
  if (kernel.dimension() == 1) {
    auto f = [&](double s) { return radial_profile(kernel, s, true).real(); };
    return 2.0 * quad::integrate_pieces(f, radius, horizon, breaks, opt).value;
  }
  auto f = [&](double r) { return r * radial_profile(kernel, r, true).real(); };
  return 2.0 * kPi * quad::integrate_pieces(f, radius, horizon, breaks, opt).value;
}

}  // namespace nlhelm
