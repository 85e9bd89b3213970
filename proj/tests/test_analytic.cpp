#include <doctest.h>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <random>

#include "nlhelm/analytic.hpp"
#include "nlhelm/experiments.hpp"

using namespace nlhelm;

namespace {

const double k2pi = 2.0 * kPi;

Source gaussian_source() { return Source::gaussian(2.0 * std::sqrt(kPi), k2pi); }

bool close(cplx a, cplx b, double rel) { return std::abs(a - b) <= rel * std::abs(b); }

/// Integral over R of (1 - cos(xi s)) gamma(s) by Gauss-Kronrod on the kernel support.
cplx dispersion_by_gk(const KernelSpec& kernel, double k, cplx xi) {
  using boost::math::quadrature::gauss_kronrod;
  const double H = kernel.horizon();
  auto f = [&](double s) { return (1.0 - std::cos(xi * s)) * eval_real(kernel, s); };
  cplx total = 0.0;
  // Split at the nominal horizon so the sigmoid edge is resolved.
  const double cuts[] = {0.0, 0.9 * kernel.delta, 1.1 * kernel.delta, H};
  for (int i = 0; i + 1 < 4; ++i)
    if (cuts[i + 1] > cuts[i]) total += gauss_kronrod<double, 61>::integrate(f, cuts[i], cuts[i + 1], 15, 1e-14);
  return 2.0 * total - k * k;
}

}  // namespace

TEST_CASE("dispersion roots of the exponential kernel") {
  const DispersionRoot prop = dispersion_root(KernelSpec::exponential(1, 0.9 / k2pi), k2pi);
  CHECK(prop.kind == WaveKind::PropagatingReal);
  CHECK(prop.k_tilde.imag() == 0.0);
  CHECK(prop.k_tilde.real() / k2pi == doctest::Approx(2.29415733870562).epsilon(1e-13));
  CHECK(prop.residual <= 1e-10);

  const DispersionRoot ev = dispersion_root(KernelSpec::exponential(1, 1.1 / k2pi), k2pi);
  CHECK(ev.kind == WaveKind::EvanescentComplex);
  CHECK(std::abs(ev.k_tilde.real()) <= 1e-12);
  CHECK(ev.k_tilde.imag() / k2pi == doctest::Approx(2.18217890235992).epsilon(1e-13));
  CHECK(ev.residual <= 1e-10);
  CHECK(to_string(ev.kind) == "EvanescentComplex");
}

TEST_CASE("fractional dispersion root") {
  const DispersionRoot r = dispersion_root(KernelSpec::fractional(1, 0.5), 3.0);
  CHECK(r.k_tilde.real() == doctest::Approx(9.0).epsilon(1e-14));
  CHECK(r.kind == WaveKind::PropagatingReal);
  CHECK_THROWS(dispersion_root_newton(KernelSpec::fractional(1, 0.5), 3.0));
}

TEST_CASE("piecewise constant dispersion roots") {
  // Sharp indicator: F(xi) = 6/delta^3 (delta - sin(xi delta)/xi) - k^2; mpmath root.
  const KernelSpec sharp = KernelSpec::piecewise_constant(1, 0.25, false);
  const DispersionRoot r = dispersion_root(sharp, k2pi);
  CHECK(r.kind == WaveKind::PropagatingReal);
  CHECK(r.k_tilde.real() == doctest::Approx(6.7480391074976999399).epsilon(1e-10));
  // At k = 4pi the real bracket tops out below k^2, so the root leaves the axis.
  const DispersionRoot c = dispersion_root(sharp, 4.0 * kPi);
  CHECK(c.kind == WaveKind::EvanescentComplex);
  CHECK(close(c.k_tilde, {17.203090948790542920, 7.0882836859177901760}, 1e-10));

  for (const KernelSpec& kernel :
       {sharp, KernelSpec::piecewise_constant(1, 0.25, true), KernelSpec::piecewise_constant(1, 0.5, true)}) {
    for (double k : {k2pi, 4.0 * kPi}) {
      const DispersionRoot root = dispersion_root(kernel, k);
      CHECK(root.k_tilde.imag() >= 0.0);
      CHECK(root.residual <= 1e-10 * k * k);
      CHECK(std::abs(dispersion_by_gk(kernel, k, root.k_tilde)) <= 1e-9 * k * k);
    }
  }
}

TEST_CASE("closed form and Newton agree for propagating exponential kernels") {
  for (double c : {0.05, 0.1}) {
    const KernelSpec kernel = KernelSpec::exponential(1, c);
    for (double k : {1.0, 3.0, 5.0, 8.0}) {
      CAPTURE(c);
      CAPTURE(k);
      const cplx closed = dispersion_root(kernel, k).k_tilde;
      const cplx newton = dispersion_root_newton(kernel, k).k_tilde;
      CHECK(close(newton, closed, 1e-8));
    }
  }
}

TEST_CASE("dispersion function closed form matches quadrature") {
  const KernelSpec kernel = KernelSpec::exponential(1, 0.1);
  for (cplx xi : {cplx(1.0, 0.0), cplx(4.0, 2.0), cplx(7.0, -3.0)}) {
    const cplx closed = dispersion_function(kernel, 2.0, xi);
    const cplx gk = dispersion_by_gk(kernel, 2.0, xi);
    CHECK(std::abs(closed - gk) <= 1e-9 * std::max(1.0, std::abs(closed)));
  }
}

TEST_CASE("Green's function") {
  const cplx kt{3.0, 0.0};
  CHECK(close(green_value(0.0, cplx(0.0), kt), cplx(0.0, 1.0 / 6.0), 1e-15));
  CHECK(close(green_value(0.0, cplx(1.0), kt), cplx(0.0, 1.0 / 6.0) * std::exp(cplx(0.0, 3.0)), 1e-15));

  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  const cplx kc{4.0, 1.5};
  for (int i = 0; i < 100; ++i) {
    const double a = u(rng), b = u(rng);
    CHECK(close(green_value(a, cplx(b), kc), green_value(b, cplx(a), kc), 1e-14));
  }

  // -G'' - k~^2 G = delta: smooth away from x0, derivative jump of -1 at x0.
  const double h = 1e-4;
  for (double x : {-0.7, 0.4, 1.3}) {
    const cplx d2 = (green_value(0.1, x + h, kc) - 2.0 * green_value(0.1, x, kc) + green_value(0.1, x - h, kc)) / (h * h);
    CHECK(std::abs(d2 + kc * kc * green_value(0.1, x, kc)) <= 1e-5 * std::abs(kc * kc * green_value(0.1, x, kc)));
  }
  const cplx right = (green_value(0.1, 0.1 + h, kc) - green_value(0.1, cplx(0.1), kc)) / h;
  const cplx left = (green_value(0.1, cplx(0.1), kc) - green_value(0.1, 0.1 - h, kc)) / h;
  CHECK(std::abs(right - left + 1.0) <= 1e-3);
}

TEST_CASE("exact solutions of the exponential kernel") {
  const Source f = gaussian_source();
  CHECK(close(exact_solution_exponential(f, k2pi, 0.9 / k2pi, 0.0),
              {-0.17886225070862304927, 0.25776243561988698643}, 1e-10));
  CHECK(close(exact_solution_exponential(f, k2pi, 0.9 / k2pi, 0.3),
              {0.24651643989639263888, -0.097522302719902942605}, 1e-10));
  CHECK(close(exact_solution_exponential(f, k2pi, 1.1 / k2pi, 0.0), cplx(-0.18337393016769542891), 1e-10));
  CHECK(close(exact_solution_exponential(f, k2pi, 1.1 / k2pi, 0.3), cplx(0.025974840285815376986), 1e-10));
  CHECK_THROWS(exact_solution_exponential(f, k2pi, 1.0 / k2pi, 0.0));
  CHECK(f.l2_norm_1d(1.0) == doctest::Approx(1.5832334870861595386).epsilon(1e-12));
}

TEST_CASE("exact solutions are even for even sources") {
  const Source f = gaussian_source();
  for (double ratio : {0.9, 1.1})
    for (double x : {0.05, 0.3, 0.77, 1.4}) {
      const cplx a = exact_solution_exponential(f, k2pi, ratio / k2pi, x);
      const cplx b = exact_solution_exponential(f, k2pi, ratio / k2pi, -x);
      CHECK(std::abs(a - b) <= 1e-12 * std::max(1e-3, std::abs(a)));
    }
}

TEST_CASE("zero source gives a zero solution") {
  CHECK(averaged_solution(Source::zero(), cplx(3.0), cplx(0.2)) == cplx(0.0));
  CHECK(exact_solution_exponential(Source::zero(), k2pi, 0.9 / k2pi, 0.4) == cplx(0.0));
}

TEST_CASE("averaged solution continues into the complex plane") {
  const Source f = gaussian_source();
  const cplx kt = dispersion_root(KernelSpec::exponential(1, 0.9 / k2pi), k2pi).k_tilde;
  // Outside the support the solution is a single exponential in x~.
  const cplx base = averaged_solution(f, kt, cplx(1.2));
  for (cplx x : {cplx(1.5, 0.3), cplx(1.9, 1.0)}) {
    const cplx want = base * std::exp(cplx(0.0, 1.0) * kt * (x - 1.2));
    CHECK(close(averaged_solution(f, kt, x), want, 1e-10));
  }
}

TEST_CASE("kappa weight") {
  const double c = 0.9 / k2pi;
  const KernelSpec kernel = KernelSpec::exponential(1, c);
  const cplx kt = dispersion_root(kernel, k2pi).k_tilde;
  // Closed form (1 / (2 c^3)) e^{-t/c} / (k~^2 + c^-2) for t >= 0.
  for (double t : {0.0, 0.01, 0.05, 0.2}) {
    const cplx want = std::exp(-t / c) / (2.0 * c * c * c) / (kt * kt + 1.0 / (c * c));
    CHECK(close(kappa_weight(kernel, kt, t), want, 1e-10));
    CHECK(close(kappa_weight(kernel, kt, -t), want, 1e-10));
  }
  const cplx tc{0.03, 0.02};
  CHECK(close(kappa_weight(kernel, kt, tc),
              std::exp(-tc / c) / (2.0 * c * c * c) / (kt * kt + 1.0 / (c * c)), 1e-9));

  const KernelSpec pc = KernelSpec::piecewise_constant(1, 0.25, false);
  CHECK(kappa_weight(pc, cplx(6.7), 0.3) == cplx(0.0));
  CHECK(kappa_weight(pc, cplx(6.7), 0.1) != cplx(0.0));
  CHECK_THROWS_AS(kappa_weight(KernelSpec::fractional(1, 0.5), cplx(1.0), 0.1), std::domain_error);
  CHECK_THROWS_AS(kappa_weight(kernel, cplx(0.0, 2.0 / c), 0.1), std::domain_error);
}

TEST_CASE("decay bound") {
  DecayBoundParams p;
  p.l = 1.0;
  p.k = k2pi;
  p.z1 = 0.0;
  p.z2 = 40.0;
  p.k_tilde = k2pi / std::sqrt(0.19);
  p.f_norm = 1.0;
  CHECK(decay_bound(p, BoundKind::Average, 1.5, 0.125) == doctest::Approx(5.1166130031689523055e-7).epsilon(1e-12));
  p.moment_constant = 0.5;
  CHECK(decay_bound(p, BoundKind::Exact, 1.5, 0.125) == doctest::Approx(2.0 * 5.1166130031689523055e-7).epsilon(1e-12));
  CHECK_THROWS(decay_bound(p, BoundKind::Average, 0.5, 0.0));

  DecayBoundParams q = p;
  q.moment_constant = 1.0;
  q.k_tilde = cplx(0.0, 13.711034416945150746);
  CHECK(decay_bound(q, BoundKind::Average, 1.5, 0.125) == doctest::Approx(0.0016740103317203560557).epsilon(1e-12));
  q.z1 = 10.0;
  CHECK(decay_bound(q, BoundKind::Average, -1.5, -0.125) == doctest::Approx(0.00042799675292593956854).epsilon(1e-12));
  q.lambda = 1.0;
  CHECK_THROWS(q.validate());
}

TEST_CASE("decay bound decreases into the layer") {
  DecayBoundParams p;
  p.k = k2pi;
  p.z2 = 40.0;
  p.k_tilde = k2pi / std::sqrt(0.19);
  double prev = decay_bound(p, BoundKind::Average, 1.0 + 1e-9, 0.0);
  for (double x = 1.05; x <= 2.0; x += 0.05) {
    const double eta = 0.5 * (x - 1.0) * (x - 1.0);
    const double b = decay_bound(p, BoundKind::Average, x, eta);
    CHECK(b < prev);
    prev = b;
  }
}

TEST_CASE("oracle export") {
  const nlohmann::json j = export_oracle({0.0, 0.5}, {cplx(1.0, 2.0), cplx(-3.0, 0.0)});
  REQUIRE(j.size() == 2);
  CHECK(j[1]["x"] == 0.5);
  CHECK(j[0]["im"] == 2.0);
  CHECK(j[1]["re"] == -3.0);
  CHECK_THROWS(export_oracle({0.0}, {}));
}

TEST_CASE("kappa average of a computed field matches the averaged solution inside") {
  const ExperimentConfig cfg = load_experiment(NLHELM_CONFIG_DIR "/example_1_1_propagating.cfg");
  const double h = 1.0 / 128.0;
  const Grid1D grid = build_grid_1d(h, cfg.l, cfg.d_pml, cfg.boundary_width());
  const PmlSetup pml = cfg.pml(cfg.l, cfg.d_pml);
  const SolveReport rep = solve(assemble(cfg.kernel, pml, grid, cfg.source, cfg.k, cfg.assembly), cfg.solver);
  const cplx kt = dispersion_root(cfg.kernel, cfg.k).k_tilde;

  std::vector<std::size_t> nodes;
  for (int n = -96; n <= 96; n += 16) nodes.push_back(*grid.find(n));
  const std::vector<cplx> avg = kappa_average(cfg.kernel, kt, pml, grid, rep.field, nodes);
  double scale = 0.0;
  std::vector<cplx> want;
  for (std::size_t i : nodes) {
    want.push_back(averaged_solution(cfg.source, kt, grid.x(i)));
    scale = std::max(scale, std::abs(want.back()));
  }
  for (std::size_t j = 0; j < nodes.size(); ++j) CHECK(std::abs(avg[j] - want[j]) <= 5e-3 * scale);
}
