#pragma once

#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "nlhelm/kernel.hpp"
#include "nlhelm/source.hpp"

namespace nlhelm {

enum class WaveKind { PropagatingReal, EvanescentComplex };

std::string_view to_string(WaveKind w);

/// Root k~ (Im >= 0) of  integral (1 - exp(i k~ s)) gamma_r(s) ds = k^2.
struct DispersionRoot {
  cplx k_tilde;
  WaveKind kind = WaveKind::PropagatingReal;
  double residual = 0.0;  // |F(k~)|
};

/// F(xi) = integral (1 - exp(i xi s)) gamma_r(s) ds - k^2 for a 1D kernel.
/// Exponential kernels use the closed form, which continues F past the
/// abscissa of convergence; the others use quadrature over the horizon.
cplx dispersion_function(const KernelSpec& kernel, double k, cplx xi);
cplx dispersion_derivative(const KernelSpec& kernel, cplx xi);

/// Exponential kernels: k / sqrt(1 - (c k)^2), principal branch reflected
/// into the upper half-plane. Fractional kernels: k^{1/s}. Other kernels:
/// damped Newton from k, then a grid of starts over [0, 3k] x [0, 3k].
DispersionRoot dispersion_root(const KernelSpec& kernel, double k);

/// Same root found by Newton iteration regardless of the family.
DispersionRoot dispersion_root_newton(const KernelSpec& kernel, double k);

/// G_{x0}(x) = i / (2 k~) exp(i k~ |x - x0|), with |x - x0| continued as
/// (x - x0) or (x0 - x) by the sign of Re(x - x0).
cplx green_value(double x0, cplx x, cplx k_tilde);

/// u^a(x) = integral G_x(y) f(y) dy.
cplx averaged_solution(const Source& f, cplx k_tilde, cplx x);

/// Solution of the whole-space equation with the 1D exponential kernel.
cplx exact_solution_exponential(const Source& f, double k, double c_gamma, double x);

/// kappa(t) = (1/k~) integral_0^inf sin(k~ u) gamma_r(|t| + u) du (even in t).
/// Throws std::domain_error when the integral diverges (Im k~ >= 1/c for
/// exponential kernels).
cplx kappa_weight(const KernelSpec& kernel, cplx k_tilde, double t);
cplx kappa_weight(const KernelSpec& kernel, cplx k_tilde, cplx t);

struct DecayBoundParams {
  double l = 1.0;
  double k = 1.0;
  double z1 = 0.0;
  double z2 = 1.0;
  cplx k_tilde;
  double lambda = 0.5;
  double moment_constant = 1.0;  // (1 - (delta k)^2)^2
  double f_norm = 1.0;           // ||f||_{L2(Omega)}

  void validate() const;
};

enum class BoundKind { Average, Exact };

/// Decay bound for |u^a(x~)| or |u^e(x~)| at a PML point |x| > l.
double decay_bound(const DecayBoundParams& p, BoundKind which, double x, double eta);

/// Oracle values as [{x, re, im}, ...] for regression freezing.
nlohmann::json export_oracle(const std::vector<double>& xs, const std::vector<cplx>& values);

}  // namespace nlhelm
