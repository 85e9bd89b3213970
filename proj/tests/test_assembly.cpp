#include <doctest.h>

#include <boost/math/quadrature/gauss.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>

#include "nlhelm/assembly.hpp"
#include "nlhelm/solver.hpp"
#include "oracles.hpp"

using namespace nlhelm;
using namespace nlhelm::oracle;

namespace {

const cplx I{0.0, 1.0};

PmlSetup cartesian_layer(cplx z, double l = 1.0, double d = 1.0, double k = 2.0 * kPi) {
  PmlSetup p;
  p.style = PmlStyle::Cartesian;
  p.x1.z = z;
  p.x1.k = k;
  p.x1.profile.inner_extent = l;
  p.x1.profile.pml_width = d;
  p.x2 = p.x1;
  return p;
}

double max_abs_diff(const SparseComplexSystem::Matrix& a, const SparseComplexSystem::Matrix& b) {
  const SparseComplexSystem::Matrix d = a - b;
  double m = 0.0;
  for (int r = 0; r < d.outerSize(); ++r)
    for (SparseComplexSystem::Matrix::InnerIterator it(d, r); it; ++it) m = std::max(m, std::abs(it.value()));
  return m;
}

double max_abs(const SparseComplexSystem::Matrix& a) {
  double m = 0.0;
  for (int r = 0; r < a.outerSize(); ++r)
    for (SparseComplexSystem::Matrix::InnerIterator it(a, r); it; ++it) m = std::max(m, std::abs(it.value()));
  return m;
}

}  // namespace

TEST_CASE("2D weight function") {
  const double h = 0.3;
  CHECK(weight_2d({h, 0.0}) == doctest::Approx(h));
  CHECK(weight_2d({h, h}) == doctest::Approx(h));
  CHECK(weight_2d({2 * h, h}) == doctest::Approx(5.0 * h / 3.0));
  CHECK(weight_2d({0.0, 0.0}) == 0.0);
  CHECK(weight_2d({-h, 2 * h}) == weight_2d({2 * h, h}));
}

TEST_CASE("constant kernel coefficients in 1D") {
  // Sharp indicator with delta = 1: gamma = 3 inside the horizon.
  const KernelSpec kernel = KernelSpec::piecewise_constant(1, 1.0, false);
  const double h = 0.125;
  for (int d = 1; d <= 7; ++d) {
    CHECK(coeff_1d(kernel, {}, h, 0, d).real() == doctest::Approx(-3.0 * h).epsilon(1e-12));
    CHECK(coeff_1d(kernel, {}, h, 4, 4 - d).real() == doctest::Approx(-3.0 * h).epsilon(1e-12));
  }
  CHECK(coeff_1d(kernel, {}, h, 0, 9) == cplx(0.0));
  CHECK(coeff_1d(kernel, {}, h, 0, 40) == cplx(0.0));
  CHECK_THROWS_AS(coeff_1d(kernel, {}, h, 3, 3), std::invalid_argument);
}

TEST_CASE("stencil reach follows the horizon") {
  const KernelSpec kernel = KernelSpec::piecewise_constant(1, 0.25, false);
  CHECK(stencil_reach(kernel, 1.0 / 16.0) == 4);
  CHECK(coeff_1d(kernel, {}, 1.0 / 16.0, 0, 5) == cplx(0.0));
  CHECK(coeff_1d(kernel, {}, 1.0 / 16.0, 0, 4) != cplx(0.0));
  CHECK_THROWS_AS(stencil_reach(KernelSpec::fractional(1, 0.5), 0.1), ConfigError);
}

TEST_CASE("1D exponential coefficients match an independent quadrature") {
  const double k = 2.0 * kPi, c = 0.9 / k, h = 1.0 / 32.0;
  const cplx z = 40.0 * (1.0 + I);
  const OracleStretch none{0.0, k, 1e9, 1.0};
  const OracleStretch layer{z, k, 1.0, 1.0};
  const KernelSpec kernel = KernelSpec::exponential(1, c);

  const std::pair<int, int> free_pairs[] = {{0, 1}, {3, 5}, {-7, 2}, {10, -3}};
  for (auto [n, m] : free_pairs) {
    CAPTURE(n);
    CAPTURE(m);
    const cplx want = oracle_coeff_exponential(c, none, h, n, m);
    CHECK(std::abs(coeff_1d(kernel, {}, h, n, m) - want) <= 1e-10 * std::abs(want));
  }

  const PmlSetup pml = cartesian_layer(z);
  const std::pair<int, int> pml_pairs[] = {{30, 33}, {31, 32}, {50, 47}, {-40, -36}, {20, 40}, {-33, -30}};
  for (auto [n, m] : pml_pairs) {
    CAPTURE(n);
    CAPTURE(m);
    const cplx want = oracle_coeff_exponential(c, layer, h, n, m);
    CHECK(std::abs(coeff_1d(kernel, pml, h, n, m) - want) <= 1e-10 * std::abs(want));
  }
}

TEST_CASE("constant kernel coefficient in 2D matches tensor Gauss") {
  // Sharp 2D indicator with delta = 1 covers the whole support of phi_m.
  const KernelSpec kernel = KernelSpec::piecewise_constant(2, 1.0, false);
  const double h = 0.125, c = 8.0 / kPi;
  using G = boost::math::quadrature::gauss<double, 20>;
  const auto w = [](double x, double y) { return (x * x + y * y) / (std::abs(x) + std::abs(y)); };
  for (Index2 m : {Index2{1, 0}, Index2{1, 1}, Index2{2, 1}, Index2{-1, 3}}) {
    CAPTURE(m[0]);
    CAPTURE(m[1]);
    const double xm = m[0] * h, ym = m[1] * h;
    const auto f = [&](double x, double y) {
      return (1.0 - std::abs(x - xm) / h) * (1.0 - std::abs(y - ym) / h) * w(x, y);
    };
    double total = 0.0;
    for (int cx = 0; cx < 2; ++cx)
      for (int cy = 0; cy < 2; ++cy) {
        const double x0 = xm - h + cx * h, y0 = ym - h + cy * h;
        const bool corner = (x0 == 0.0 || x0 + h == 0.0) && (y0 == 0.0 || y0 + h == 0.0);
        if (!corner) {
          total += G::integrate([&](double x) { return G::integrate([&](double y) { return f(x, y); }, y0, y0 + h); },
                                x0, x0 + h);
          continue;
        }
        // w is singular at the origin corner: split into two triangles with
        // the apex there and pull back by (u, t) -> (u, u t).
        const double sx = x0 == 0.0 ? 1.0 : -1.0, sy = y0 == 0.0 ? 1.0 : -1.0;
        total += G::integrate(
            [&](double u) {
              return u * G::integrate([&](double t) { return f(sx * u, sy * u * t) + f(sx * u * t, sy * u); }, 0.0, 1.0);
            },
            0.0, h);
      }
    const double want = -c * total / w(xm, ym);
    AssemblyOptions tight;
    tight.rel_tol = 1e-12;
    const cplx got = coeff_2d(kernel, {}, h, {0, 0}, m, tight);
    // The library floors its error at rel_tol times the diagonal scale.
    CHECK(std::abs(got - want) <= 1e-10 * std::max(std::abs(want), coefficient_scale(kernel, h)));
  }
  CHECK(coeff_2d(kernel, {}, h, {0, 0}, {stencil_reach(kernel, h) + 2, 0}) == cplx(0.0));
}

TEST_CASE("no-PML coefficients are symmetric and translation invariant") {
  const KernelSpec kernel = KernelSpec::exponential(1, 0.1);
  const double h = 1.0 / 32.0;
  for (int d = 1; d <= 12; ++d) {
    const cplx a = coeff_1d(kernel, {}, h, 0, d);
    CHECK(std::abs(coeff_1d(kernel, {}, h, d, 0) - a) <= 1e-10 * std::abs(a));
    CHECK(std::abs(coeff_1d(kernel, {}, h, 17, 17 + d) - a) <= 1e-10 * std::abs(a));
    CHECK(std::abs(a.imag()) == 0.0);
  }
}

TEST_CASE("row stencil is consistent with the nonlocal operator") {
  // For u = cos(w x) the exponential kernel gives L u = w^2 / (1 + c^2 w^2) u.
  const double c = 0.1, w = 3.0;
  const KernelSpec kernel = KernelSpec::exponential(1, c);
  const double exact = w * w / (1.0 + c * c * w * w);
  double prev = 0.0;
  for (int level : {4, 5, 6, 7}) {
    const double h = std::ldexp(1.0, -level);
    const RowStencil1D row = row_stencil_1d(kernel, {}, h, 0);
    cplx sum = -row.off_sum;
    for (std::size_t j = 0; j < row.offsets.size(); ++j) sum += row.values[j] * std::cos(w * row.offsets[j] * h);
    const double err = std::abs(sum - exact);
    if (level > 4) {
      CAPTURE(level);
      CHECK(std::log2(prev / err) == doctest::Approx(2.0).epsilon(0.1));
    }
    prev = err;
  }
  CHECK(prev <= 1e-3 * exact);
}

TEST_CASE("assembled rows annihilate constants") {
  const KernelSpec kernel = KernelSpec::exponential(1, 0.02);
  const double h = 1.0 / 16.0, k = 2.0 * kPi;
  const PmlSetup pml = cartesian_layer(40.0 * (1.0 + I));
  const Grid1D grid = build_grid_1d(h, 1.0, 1.0, kernel.horizon());
  const SparseComplexSystem sys = assemble(kernel, pml, grid, Source::gaussian(1.0, 2.0 * kPi), k);
  const int reach = stencil_reach(kernel, h);
  int checked = 0;
  for (std::size_t u = 0; u < sys.size(); ++u) {
    const int n = grid.lattice(sys.unknown_node[u]);
    if (std::abs(n) + reach > grid.m_inner + grid.m_pml) continue;
    cplx sum = 0.0;
    double mag = 0.0;
    for (SparseComplexSystem::Matrix::InnerIterator it(sys.matrix, static_cast<int>(u)); it; ++it) {
      sum += it.value();
      mag += std::abs(it.value());
    }
    const cplx mass = k * k * pml.map(n * h).alpha;
    CHECK(std::abs(sum + mass) <= 1e-12 * mag);
    ++checked;
  }
  CHECK(checked > 40);
}

TEST_CASE("a layer with zero absorption is transparent") {
  const double k = 2.0 * kPi;
  const Source f = Source::gaussian(1.0, 2.0 * kPi);
  PmlSetup silent = cartesian_layer(40.0 * (1.0 + I));
  silent.x1.profile.inner_extent = silent.x2.profile.inner_extent = 100.0;

  {
    const KernelSpec kernel = KernelSpec::exponential(1, 0.9 / k);
    const Grid1D grid = build_grid_1d(1.0 / 32.0, 1.0, 1.0, kernel.horizon());
    const auto a = assemble(kernel, silent, grid, f, k);
    const auto b = assemble(kernel, {}, grid, f, k);
    CHECK(max_abs_diff(a.matrix, b.matrix) <= 1e-12 * max_abs(b.matrix));
    CHECK((a.rhs - b.rhs).norm() == 0.0);
  }
  for (PmlStyle style : {PmlStyle::Cartesian, PmlStyle::Polar}) {
    const KernelSpec kernel = KernelSpec::exponential(2, 0.1 / k);
    const DomainShape shape = style == PmlStyle::Polar ? DomainShape::Disk : DomainShape::Square;
    const Grid2D grid = build_grid_2d(0.25, shape, 1.0, 1.0, kernel.horizon());
    PmlSetup p = silent;
    p.style = style;
    const auto a = assemble(kernel, p, grid, Source::gaussian(1.0, 2.0 * kPi), k);
    const auto b = assemble(kernel, {}, grid, Source::gaussian(1.0, 2.0 * kPi), k);
    CHECK(max_abs_diff(a.matrix, b.matrix) <= 1e-12 * max_abs(b.matrix));
  }
}

TEST_CASE("fractional diagonal carries the tail mass") {
  const KernelSpec kernel = KernelSpec::fractional(1, 0.5, 0.5);
  const Grid1D grid = build_grid_1d(0.125, 1.0, 1.0, 0.5);
  const PmlSetup pml = cartesian_layer({0.0, 10.0});
  AssemblyOptions with, without;
  without.tail_correction = false;
  const Source f = Source::gaussian(1.0, 2.0 * kPi);
  const auto a = assemble(kernel, pml, grid, f, 1.0, with);
  const auto b = assemble(kernel, pml, grid, f, 1.0, without);
  const double tail = tail_mass(kernel, 0.5);
  CHECK(tail == doctest::Approx(4.0 / kPi).epsilon(1e-14));
  for (int u = 0; u < static_cast<int>(a.size()); ++u) {
    const cplx diff = a.matrix.coeff(u, u) - b.matrix.coeff(u, u);
    CHECK(std::abs(diff - tail) <= 1e-13 * std::abs(a.matrix.coeff(u, u)));
    for (SparseComplexSystem::Matrix::InnerIterator it(a.matrix, u); it; ++it)
      if (it.col() != u) CHECK(it.value() == b.matrix.coeff(u, it.col()));
  }
}

TEST_CASE("system layout") {
  const KernelSpec kernel = KernelSpec::piecewise_constant(1, 0.25, false);
  const Grid1D grid = build_grid_1d(1.0 / 16.0, 1.0, 1.0, 0.25);
  const auto sys = assemble(kernel, cartesian_layer({0.0, 40.0}), grid, Source::gaussian(1.0, 2.0 * kPi), 2.0 * kPi);
  CHECK(sys.size() == 65);
  CHECK(sys.lower_bandwidth <= 4);
  CHECK(sys.upper_bandwidth <= 4);
  CHECK(sys.lower_bandwidth + sys.upper_bandwidth + 1 <= 9);
  for (std::size_t u = 0; u < sys.size(); ++u) CHECK(grid.classes[sys.unknown_node[u]] != NodeClass::BoundaryLayer);
  // Rows in the layer carry no source.
  for (std::size_t u = 0; u < sys.size(); ++u)
    if (grid.classes[sys.unknown_node[u]] == NodeClass::Pml) CHECK(sys.rhs[static_cast<Eigen::Index>(u)] == cplx(0.0));
}

TEST_CASE("zero source gives a zero system right-hand side and field") {
  const KernelSpec kernel = KernelSpec::exponential(1, 0.1);
  const Grid1D grid = build_grid_1d(1.0 / 16.0, 1.0, 1.0, kernel.horizon());
  const auto sys = assemble(kernel, cartesian_layer({0.0, 20.0}), grid, Source::zero(), 2.0 * kPi);
  CHECK(sys.rhs.norm() == 0.0);
  SolverOptions opt;
  CHECK_THROWS_AS(solve(sys, opt), SolverError);
  opt.allow_zero_rhs = true;
  const SolveReport rep = solve(sys, opt);
  CHECK(rep.field.norm() == 0.0);
  CHECK(static_cast<std::size_t>(rep.field.size()) == grid.size());
}

TEST_CASE("sources reaching past the domain are rejected") {
  const KernelSpec kernel = KernelSpec::exponential(1, 0.1);
  const Grid1D grid = build_grid_1d(1.0 / 16.0, 1.0, 1.0, kernel.horizon());
  CHECK_THROWS(assemble(kernel, {}, grid, Source::gaussian(1.0, 1.0), 1.0));
}

TEST_CASE("assembly is independent of the thread count") {
  const double k = 2.0 * kPi;
  const KernelSpec kernel = KernelSpec::exponential(2, 0.1 / k);
  const Grid2D grid = build_grid_2d(0.25, DomainShape::Disk, 1.0, 1.0, kernel.horizon());
  PmlSetup pml = cartesian_layer({0.0, 20.0});
  pml.style = PmlStyle::Polar;
  AssemblyOptions one, three;
  three.threads = 3;
  const Source f = Source::gaussian(2.0 * std::sqrt(kPi), 2.0 * kPi);
  const auto a = assemble(kernel, pml, grid, f, k, one);
  const auto b = assemble(kernel, pml, grid, f, k, three);
  CHECK(max_abs_diff(a.matrix, b.matrix) == 0.0);
  CHECK(a.matrix.nonZeros() == b.matrix.nonZeros());
}

TEST_CASE("matrix dump") {
  const KernelSpec kernel = KernelSpec::piecewise_constant(1, 0.25, false);
  const Grid1D grid = build_grid_1d(0.125, 1.0, 1.0, 0.25);
  const auto sys = assemble(kernel, {}, grid, Source::gaussian(1.0, 2.0 * kPi), 1.0);
  const auto dir = std::filesystem::temp_directory_path() / "nlhelm_dump_test";
  std::filesystem::create_directories(dir);
  const std::string prefix = (dir / "sys").string();
  write_matrix_dump(sys, prefix, {{"note", "unit test"}});
  std::ifstream coo(prefix + ".coo");
  std::string line;
  long lines = 0;
  while (std::getline(coo, line))
    if (!line.empty()) ++lines;
  CHECK(lines == sys.matrix.nonZeros());
  std::ifstream js(prefix + ".json");
  const auto header = nlohmann::json::parse(js);
  CHECK(header["note"] == "unit test");
  CHECK(header["unknowns"] == sys.size());
  CHECK(header["nonzeros"] == sys.matrix.nonZeros());
  std::filesystem::remove_all(dir);
}
