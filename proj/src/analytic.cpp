#include "nlhelm/analytic.hpp"

#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>

#include "nlhelm/quadrature.hpp"

namespace nlhelm {

namespace {

const cplx I{0.0, 1.0};

void require_1d(const KernelSpec& kernel, const char* what) {
  if (kernel.dimension() != 1) throw std::invalid_argument(std::string(what) + " needs a 1D kernel");
}

/// Breakpoints on [0, H] where a radial profile changes character.
std::vector<double> radial_breaks(const KernelSpec& kernel, double shift = 0.0) {
  std::vector<double> out;
  if (kernel.is_exponential())
    for (double b = kernel.c_gamma; b < kernel.horizon(); b *= 2.0) out.push_back(b - shift);
  if (kernel.is_piecewise_constant()) out.push_back(kernel.delta - shift);
  return out;
}

/// 2 * integral_0^H w(s) gamma_r(s) ds for the real profile.
template <class W>
cplx radial_integral(const KernelSpec& kernel, W weight) {
  const double H = kernel.horizon();
  auto f = [&](double s) -> cplx { return weight(s) * eval_real(kernel, s); };
  quad::Options opt;
  opt.rel_tol = 1e-14;
  opt.abs_tol = 1e-15 * kernel.constant() * std::pow(kernel.length_scale(), 3);
  auto r = quad::integrate_pieces(f, 0.0, H, radial_breaks(kernel), opt);
  return 2.0 * r.value;
}

cplx upper_half_plane(cplx z) {
  if (z.imag() < 0.0 || (z.imag() == 0.0 && z.real() < 0.0)) return -z;
  return z;
}

WaveKind classify(cplx kt) {
  return std::abs(kt.imag()) <= 1e-10 * std::abs(kt) ? WaveKind::PropagatingReal
                                                       : WaveKind::EvanescentComplex;
}

cplx dispersion_quadrature(const KernelSpec& kernel, double k, cplx xi) {
  return radial_integral(kernel, [&](double s) { return 1.0 - std::cos(xi * s); }) - k * k;
}

cplx dispersion_quadrature_derivative(const KernelSpec& kernel, cplx xi) {
  return radial_integral(kernel, [&](double s) { return s * std::sin(xi * s); });
}

std::optional<cplx> newton_from(const KernelSpec& kernel, double k, cplx x) {
  const double target = 1e-12 * std::max(1.0, k * k);
  // Quadrature noise can sit above `target`; near the root Newton then stalls
  // and is accepted at the looser level.
  const auto at_noise = [&](cplx fx) -> std::optional<cplx> {
    if (std::abs(fx) <= 1e3 * target) return upper_half_plane(x);
    return std::nullopt;
  };
  // Stay where the quadrature converges: below the abscissa for exponential
  // kernels and in a box of a few k otherwise, where cos(xi s) is moderate.
  const auto inside = [&](cplx z) {
    if (kernel.is_exponential()) return std::abs(z.imag()) < 0.9 / kernel.c_gamma;
    return std::abs(z) <= 10.0 * k && std::abs(z.imag()) * kernel.horizon() <= 30.0;
  };
  if (!inside(x)) return std::nullopt;
  cplx fx = dispersion_quadrature(kernel, k, x);
  for (int it = 0; it < 80; ++it) {
    if (std::abs(fx) <= target) return upper_half_plane(x);
    const cplx d = dispersion_quadrature_derivative(kernel, x);
    if (d == cplx(0.0)) return std::nullopt;
    const cplx step = fx / d;
    if (std::abs(step) <= 1e-14 * std::abs(x)) return at_noise(fx);
    double lam = 1.0;
    cplx xn, fn;
    while (true) {
      xn = x - lam * step;
      if (inside(xn)) {
        fn = dispersion_quadrature(kernel, k, xn);
        if (std::abs(fn) < std::abs(fx)) break;
      }
      lam *= 0.5;
      if (lam < 1e-8) return at_noise(fx);
    }
    x = xn;
    fx = fn;
  }
  return at_noise(fx);
}

}  // namespace

std::string_view to_string(WaveKind w) {
  return w == WaveKind::PropagatingReal ? "PropagatingReal" : "EvanescentComplex";
}

cplx dispersion_function(const KernelSpec& kernel, double k, cplx xi) {
  require_1d(kernel, "dispersion_function");
  if (kernel.is_exponential()) {
    const double c = kernel.c_gamma;
    return xi * xi / (1.0 + c * c * xi * xi) - k * k;
  }
  if (kernel.is_fractional()) return std::pow(xi, 2.0 * kernel.s_order) - k * k;
  return dispersion_quadrature(kernel, k, xi);
}

cplx dispersion_derivative(const KernelSpec& kernel, cplx xi) {
  require_1d(kernel, "dispersion_derivative");
  if (kernel.is_exponential()) {
    const double c = kernel.c_gamma;
    const cplx den = 1.0 + c * c * xi * xi;
    return 2.0 * xi / (den * den);
  }
  if (kernel.is_fractional())
    return 2.0 * kernel.s_order * std::pow(xi, 2.0 * kernel.s_order - 1.0);
  return dispersion_quadrature_derivative(kernel, xi);
}

DispersionRoot dispersion_root(const KernelSpec& kernel, double k) {
  require_1d(kernel, "dispersion_root");
  if (!(k > 0.0)) throw std::invalid_argument("dispersion_root needs k > 0");
  DispersionRoot root;
  if (kernel.is_exponential()) {
    const double ck = kernel.c_gamma * k;
    root.k_tilde = upper_half_plane(k * std::sqrt(cplx(1.0 / (1.0 - ck * ck))));
  } else if (kernel.is_fractional()) {
    root.k_tilde = std::pow(k, 1.0 / kernel.s_order);
  } else {
    return dispersion_root_newton(kernel, k);
  }
  root.kind = classify(root.k_tilde);
  root.residual = std::abs(dispersion_function(kernel, k, root.k_tilde));
  return root;
}

DispersionRoot dispersion_root_newton(const KernelSpec& kernel, double k) {
  require_1d(kernel, "dispersion_root_newton");
  if (kernel.is_fractional())
    throw std::invalid_argument("fractional kernels use the closed-form dispersion root");
  std::optional<cplx> found = newton_from(kernel, k, k);
  for (int i = 0; !found && i <= 6; ++i)
    for (int j = 0; !found && j <= 6; ++j)
      if (i + j > 0) found = newton_from(kernel, k, cplx(0.5 * i * k, 0.5 * j * k));
  if (!found) throw std::runtime_error("dispersion_root: no root found from any start");
  DispersionRoot root;
  root.k_tilde = *found;
  root.kind = classify(root.k_tilde);
  root.residual = std::abs(dispersion_quadrature(kernel, k, root.k_tilde));
  return root;
}

cplx green_value(double x0, cplx x, cplx k_tilde) {
  cplx d = x - x0;
  if (d.real() < 0.0) d = -d;
  return I / (2.0 * k_tilde) * std::exp(I * k_tilde * d);
}

cplx averaged_solution(const Source& f, cplx k_tilde, cplx x) {
  if (f.is_zero()) return 0.0;
  const double rho = f.support_radius();
  quad::Options opt;
  opt.rel_tol = 1e-13;
  opt.abs_tol = 1e-12;
  const cplx pref = I / (2.0 * k_tilde);
  // Outside the support the Green's function factors, which keeps full
  // relative accuracy for points deep in the complex plane.
  if (x.real() >= rho || x.real() <= -rho) {
    const double sgn = x.real() >= rho ? 1.0 : -1.0;
    auto g = [&](double y) -> cplx { return std::exp(-sgn * I * k_tilde * y) * f(y); };
    opt.abs_tol = 0.0;
    const cplx transform = quad::integrate(g, -rho, rho, opt).value;
    return pref * std::exp(sgn * I * k_tilde * x) * transform;
  }
  auto g = [&](double y) -> cplx { return green_value(y, x, k_tilde) * f(y); };
  return quad::integrate_pieces(g, -rho, rho, {x.real()}, opt).value;
}

cplx exact_solution_exponential(const Source& f, double k, double c_gamma, double x) {
  const double m = 1.0 - c_gamma * c_gamma * k * k;
  if (std::abs(m) < 1e-8) throw std::invalid_argument("resonant parameters: |1 - (c k)^2| < 1e-8");
  const DispersionRoot root = dispersion_root(KernelSpec::exponential(1, c_gamma), k);
  return averaged_solution(f, root.k_tilde, x) / (m * m) + c_gamma * c_gamma / m * f(x);
}

cplx kappa_weight(const KernelSpec& kernel, cplx k_tilde, double t) {
  return kappa_weight(kernel, k_tilde, cplx(t, 0.0));
}

cplx kappa_weight(const KernelSpec& kernel, cplx k_tilde, cplx t) {
  require_1d(kernel, "kappa_weight");
  if (kernel.is_fractional())
    throw std::domain_error("kappa_weight needs a kernel with a finite horizon or exponential decay");
  const cplx tau = t.real() < 0.0 ? -t : t;
  const bool real_tau = tau.imag() == 0.0;
  double upper;
  if (kernel.is_exponential()) {
    const double rate = 1.0 / kernel.c_gamma - std::abs(k_tilde.imag());
    if (!(rate > 0.0))
      throw std::domain_error("kappa integral diverges: Im(k~) >= 1/c_gamma");
    upper = 40.0 / rate;
  } else {
    upper = kernel.horizon() - tau.real();
  }
  if (!(upper > 0.0)) return 0.0;
  auto g = [&](double u) -> cplx {
    const cplx d = tau + u;
    const cplx gamma = real_tau ? cplx(eval_real(kernel, d.real())) : eval_radial(kernel, d);
    return std::sin(k_tilde * u) * gamma;
  };
  quad::Options opt;
  opt.rel_tol = 1e-13;
  opt.abs_tol = 1e-15 * kernel.constant() * std::pow(kernel.length_scale(), 2);
  const auto r = quad::integrate_pieces(g, 0.0, upper, radial_breaks(kernel, tau.real()), opt);
  return r.value / k_tilde;
}

void DecayBoundParams::validate() const {
  if (!(lambda > 0.0 && lambda < 1.0)) throw std::invalid_argument("lambda must lie in (0, 1)");
  if (!(z2 > 0.0)) throw std::invalid_argument("z2 must be positive");
  if (!(l > 0.0) || !(k > 0.0)) throw std::invalid_argument("l and k must be positive");
}

double decay_bound(const DecayBoundParams& p, BoundKind which, double x, double eta) {
  p.validate();
  if (std::abs(x) <= p.l) throw std::invalid_argument("decay_bound needs |x| > l");
  const double scale = which == BoundKind::Exact ? 1.0 / p.moment_constant : 1.0;
  const double prefactor = std::sqrt(p.l) / (std::sqrt(2.0) * std::abs(p.k_tilde));
  if (classify(p.k_tilde) == WaveKind::PropagatingReal) {
    const double kt = p.k_tilde.real();
    return scale * prefactor * std::exp(-(kt / p.k) * p.z2 * std::abs(eta)) * p.f_norm;
  }
  const double dist = std::abs(x) + (p.z1 / p.k) * std::abs(eta);
  return scale * prefactor * std::exp(-p.lambda * p.k_tilde.imag() * (dist - p.l)) * p.f_norm;
}

nlohmann::json export_oracle(const std::vector<double>& xs, const std::vector<cplx>& values) {
  if (xs.size() != values.size()) throw std::invalid_argument("export_oracle: size mismatch");
  nlohmann::json out = nlohmann::json::array();
  for (std::size_t i = 0; i < xs.size(); ++i)
    out.push_back({{"x", xs[i]}, {"re", values[i].real()}, {"im", values[i].imag()}});
  return out;
}

}  // namespace nlhelm
