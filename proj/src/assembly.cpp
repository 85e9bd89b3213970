#include "nlhelm/assembly.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "nlhelm/quadrature.hpp"

namespace nlhelm {

namespace {

struct Rect {
  double x0, x1, y0, y1;
};

std::string context(const char* what, const std::string& n, const std::string& m) {
  return std::string(what) + " did not converge for row " + n + ", column " + m;
}

std::string index_string(Index2 i) {
  return "(" + std::to_string(i[0]) + "," + std::to_string(i[1]) + ")";
}

/// Grading exponent that turns |t|^{1-2s} endpoint behaviour into a smooth
/// integrand under t = L u^q.
double grading_exponent(const KernelSpec& kernel) {
  return kernel.is_fractional() ? 1.0 / (1.0 - kernel.s_order) : 1.0;
}

/// Integral over [a, b] of f with the substitution x = a + (b - a) u^q
/// (toward_a) or x = b - (b - a) u^q, which clusters nodes at the end.
template <class F>
quad::Result<cplx> integrate_graded(F& f, double a, double b, bool toward_a, double q,
                                    const quad::Options& opt) {
  const double len = b - a;
  auto g = [&](double u) -> cplx {
    const double uq = std::pow(u, q);
    const double jac = q * len * std::pow(u, q - 1.0);
    return f(toward_a ? a + len * uq : b - len * uq) * jac;
  };
  return quad::integrate(g, 0.0, 1.0, opt);
}

std::vector<double> pml_breaks_1d(const PmlSetup& pml, double xn, double xm) {
  std::vector<double> out;
  if (pml.style == PmlStyle::None) return out;
  const double L = pml.x1.profile.inner_extent;
  for (double s : {L, -L}) {
    out.push_back(2.0 * s - xm);            // (x_m + y)/2 = s
    out.push_back(xm + 2.0 * xn - 2.0 * s);  // x_n + (x_m - y)/2 = s
  }
  return out;
}

}  // namespace

int stencil_reach(const KernelSpec& kernel, double h) {
  const double R = kernel.horizon();
  if (!std::isfinite(R)) throw ConfigError("kernel needs a finite truncation radius to assemble");
  return static_cast<int>(std::ceil(R / h - 1e-12));
}

double weight_2d(const Point2& s) {
  const double l1 = std::abs(s[0]) + std::abs(s[1]);
  if (l1 == 0.0) return 0.0;
  return (s[0] * s[0] + s[1] * s[1]) / l1;
}

double coefficient_scale(const KernelSpec& kernel, double h) {
  if (kernel.is_fractional()) return std::pow(h, -2.0 * kernel.s_order);
  const double ell = std::max(h, kernel.length_scale());
  return 1.0 / (ell * ell);
}

cplx coeff_1d(const KernelSpec& kernel, const PmlSetup& pml, double h, int n, int m,
              const AssemblyOptions& opt) {
  if (m == n) throw std::invalid_argument("coeff_1d requires m != n");
  const double R = kernel.horizon();
  const double xn = n * h, xm = m * h;
  const double lo = std::max(xm - h, xn - R), hi = std::min(xm + h, xn + R);
  if (!(hi > lo)) return 0.0;

  auto integrand = [&](double y) -> cplx {
    const double phi = 1.0 - std::abs(y - xm) / h;
    const double s = y - xn;
    if (phi <= 0.0 || std::abs(s) > R) return 0.0;
    const Stretch1D sa = pml.map(0.5 * (xm + y));
    const Stretch1D sb = pml.map(xn + 0.5 * (xm - y));
    return phi * s * eval_complex(kernel, sa.x_tilde - sb.x_tilde) * sa.alpha * sb.alpha;
  };

  std::vector<double> breaks = pml_breaks_1d(pml, xn, xm);
  breaks.push_back(xm);
  breaks.push_back(xn);
  if (kernel.is_piecewise_constant()) {
    breaks.push_back(xn - kernel.delta);
    breaks.push_back(xn + kernel.delta);
  }
  breaks.push_back(lo);
  breaks.push_back(hi);
  std::sort(breaks.begin(), breaks.end());

  const double w = std::abs(m - n) * h;
  quad::Options qopt;
  qopt.rel_tol = opt.rel_tol;
  qopt.abs_tol = 1e-3 * opt.rel_tol * coefficient_scale(kernel, h) * w;
  const double eps = 1e-14 * h;
  const double q = grading_exponent(kernel);

  std::vector<std::pair<double, double>> pieces;
  double a = lo;
  for (double b : breaks) {
    if (b <= a + eps) continue;
    if (b > hi + eps) break;
    pieces.emplace_back(a, std::min(b, hi));
    a = std::min(b, hi);
  }
  quad::Options piece_opt = qopt;
  piece_opt.abs_tol = qopt.abs_tol / std::max<std::size_t>(1, pieces.size());

  cplx total = 0.0;
  bool ok = true;
  for (const auto& [pa, pb] : pieces) {
    quad::Result<cplx> r;
    if (kernel.is_fractional() && std::abs(pa - xn) <= eps)
      r = integrate_graded(integrand, pa, pb, true, q, piece_opt);
    else if (kernel.is_fractional() && std::abs(pb - xn) <= eps)
      r = integrate_graded(integrand, pa, pb, false, q, piece_opt);
    else
      r = quad::integrate(integrand, pa, pb, piece_opt);
    total += r.value;
    ok = ok && r.converged;
  }
  if (!ok) throw QuadratureError(context("coefficient quadrature", std::to_string(n), std::to_string(m)));
  return -total / (static_cast<double>(m - n) * h);
}

namespace {

struct Circle {
  Point2 c;
  double r;
};

/// Integral of f over the part of `cell` within distance R of p, in polar
/// coordinates centred at p. p must not lie in the open interior of the cell.
/// Angular pieces are split at corner directions and where the circles of
/// radius R and `rho_breaks` cross the cell edges, so the radial limits are
/// smooth on each piece.
template <class F>
quad::Result<cplx> integrate_polar_cell(F& f, const Rect& cell, const Point2& p, double R,
                                        const std::vector<double>& rho_breaks, double grade_q,
                                        const std::vector<Circle>& kinks, const quad::Options& opt) {
  const bool adaptive_theta = !kinks.empty();
  const std::array<Point2, 4> corners = {Point2{cell.x0, cell.y0}, Point2{cell.x1, cell.y0},
                                         Point2{cell.x1, cell.y1}, Point2{cell.x0, cell.y1}};
  const double size = std::max(cell.x1 - cell.x0, cell.y1 - cell.y0);
  const double tiny = 1e-13 * size;
  const double ref = std::atan2(0.5 * (cell.y0 + cell.y1) - p[1], 0.5 * (cell.x0 + cell.x1) - p[0]);
  auto rel_angle = [&](const Point2& q) {
    return ref + std::remainder(std::atan2(q[1] - p[1], q[0] - p[0]) - ref, 2.0 * kPi);
  };

  std::vector<double> angles;
  for (const Point2& c : corners)
    if (std::hypot(c[0] - p[0], c[1] - p[1]) > tiny) angles.push_back(rel_angle(c));
  const double th_lo = *std::min_element(angles.begin(), angles.end());
  const double th_hi = *std::max_element(angles.begin(), angles.end());

  std::vector<double> radii = rho_breaks;
  if (std::isfinite(R)) radii.push_back(R);
  for (double rho : radii) {
    for (int e = 0; e < 4; ++e) {
      const Point2& A = corners[e];
      const Point2& B = corners[(e + 1) % 4];
      const double dx = B[0] - A[0], dy = B[1] - A[1];
      const double fx = A[0] - p[0], fy = A[1] - p[1];
      const double qa = dx * dx + dy * dy, qb = 2.0 * (fx * dx + fy * dy);
      const double qc = fx * fx + fy * fy - rho * rho;
      const double disc = qb * qb - 4.0 * qa * qc;
      if (disc < 0.0) continue;
      const double sq = std::sqrt(disc);
      for (double t : {(-qb - sq) / (2.0 * qa), (-qb + sq) / (2.0 * qa)}) {
        if (t <= 0.0 || t >= 1.0) continue;
        const double th = rel_angle({A[0] + t * dx, A[1] + t * dy});
        if (th > th_lo && th < th_hi) angles.push_back(th);
      }
    }
  }
  for (const Circle& ci : kinks) {
    const double dist = std::hypot(ci.c[0] - p[0], ci.c[1] - p[1]);
    if (dist <= ci.r) continue;
    const double mid = rel_angle(ci.c), half = std::asin(ci.r / dist);
    for (double th : {mid - half, mid + half})
      for (double shift : {-2.0 * kPi, 0.0, 2.0 * kPi})
        if (th + shift > th_lo && th + shift < th_hi) angles.push_back(th + shift);
  }
  std::sort(angles.begin(), angles.end());

  quad::Result<cplx> out;
  quad::Options inner_opt = opt;
  inner_opt.abs_tol = opt.abs_tol / std::max(th_hi - th_lo, 1e-300);
  // Inner noise must sit well below what the adaptive outer pass resolves.
  if (adaptive_theta) inner_opt.abs_tol *= 1e-3;

  auto inner = [&](double th) -> cplx {
    const double ux = std::cos(th), uy = std::sin(th);
    double enter = 0.0, exit = std::numeric_limits<double>::infinity();
    const double lo[2] = {cell.x0, cell.y0}, hi[2] = {cell.x1, cell.y1};
    const double u[2] = {ux, uy};
    for (int i = 0; i < 2; ++i) {
      if (std::abs(u[i]) < 1e-300) {
        if (p[i] < lo[i] || p[i] > hi[i]) return 0.0;
        continue;
      }
      double t1 = (lo[i] - p[i]) / u[i], t2 = (hi[i] - p[i]) / u[i];
      if (t1 > t2) std::swap(t1, t2);
      enter = std::max(enter, t1);
      exit = std::min(exit, t2);
    }
    exit = std::min(exit, R);
    if (!(exit > enter)) return 0.0;
    auto g = [&](double rho) -> cplx { return f(p[0] + rho * ux, p[1] + rho * uy) * rho; };
    std::vector<double> breaks = rho_breaks;
    for (const Circle& ci : kinks) {
      // |p + rho u - c| = r
      const double fx = p[0] - ci.c[0], fy = p[1] - ci.c[1];
      const double b = fx * ux + fy * uy, c = fx * fx + fy * fy - ci.r * ci.r;
      const double disc = b * b - c;
      if (disc <= 0.0) continue;
      const double sq = std::sqrt(disc);
      breaks.push_back(-b - sq);
      breaks.push_back(-b + sq);
    }
    quad::Result<cplx> r;
    double start = enter;
    if (grade_q != 1.0 && enter <= tiny) {
      double first = exit;
      for (double b : breaks)
        if (b > tiny && b < first) first = b;
      r = integrate_graded(g, 0.0, first, true, grade_q, inner_opt);
      start = first;
    }
    if (exit > start) {
      const auto rest = quad::integrate_pieces(g, start, exit, breaks, inner_opt);
      r.value += rest.value;
      r.converged = r.converged && rest.converged;
      r.evaluations += rest.evaluations;
    }
    out.converged = out.converged && r.converged;
    out.evaluations += r.evaluations;
    return r.value;
  };

  for (std::size_t i = 0; i + 1 < angles.size(); ++i) {
    const double a = angles[i], b = angles[i + 1];
    if (b - a <= 1e-14) continue;
    if (adaptive_theta) {
      quad::Options outer = opt;
      outer.abs_tol = opt.abs_tol * (b - a) / (th_hi - th_lo);
      auto r = quad::integrate(inner, a, b, outer);
      out.value += r.value;
      out.converged = out.converged && r.converged;
    } else {
      out.value += quad::gauss8(inner, a, b);
    }
  }
  return out;
}

/// Iterated integral over `cell` (outer y1, inner y2) with breakpoints where
/// the circles cross, so an integrand with kinks along them stays piecewise
/// smooth in each 1D pass.
template <class F>
quad::Result<cplx> integrate_across_circles(F& f, const Rect& cell, const std::vector<Circle>& circles,
                                            const quad::Options& opt) {
  std::vector<double> outer_breaks;
  for (const Circle& ci : circles) {
    outer_breaks.push_back(ci.c[0] - ci.r);
    outer_breaks.push_back(ci.c[0] + ci.r);
    for (double y : {cell.y0, cell.y1}) {
      const double dy = y - ci.c[1];
      if (std::abs(dy) >= ci.r) continue;
      const double dx = std::sqrt(ci.r * ci.r - dy * dy);
      outer_breaks.push_back(ci.c[0] - dx);
      outer_breaks.push_back(ci.c[0] + dx);
    }
  }
  quad::Result<cplx> out;
  quad::Options inner_opt = opt;
  inner_opt.abs_tol = 1e-3 * opt.abs_tol / (cell.x1 - cell.x0);
  auto inner = [&](double y1) -> cplx {
    std::vector<double> breaks;
    for (const Circle& ci : circles) {
      const double dx = y1 - ci.c[0];
      if (std::abs(dx) >= ci.r) continue;
      const double dy = std::sqrt(ci.r * ci.r - dx * dx);
      breaks.push_back(ci.c[1] - dy);
      breaks.push_back(ci.c[1] + dy);
    }
    auto g = [&](double y2) { return f(y1, y2); };
    const auto r = quad::integrate_pieces(g, cell.y0, cell.y1, breaks, inner_opt);
    out.converged = out.converged && r.converged;
    out.evaluations += r.evaluations;
    return r.value;
  };
  const auto r = quad::integrate_pieces(inner, cell.x0, cell.x1, outer_breaks, opt);
  out.value = r.value;
  out.converged = out.converged && r.converged;
  return out;
}

/// Box of points (c + t y) for y in `cell`, t = +-1/2, as [min, max] per axis.
Rect affine_box(const Point2& c, double t, const Rect& cell) {
  double ax = c[0] + t * cell.x0, bx = c[0] + t * cell.x1;
  double ay = c[1] + t * cell.y0, by = c[1] + t * cell.y1;
  return {std::min(ax, bx), std::max(ax, bx), std::min(ay, by), std::max(ay, by)};
}

double min_radius(const Rect& r) {
  const double dx = std::max({r.x0, -r.x1, 0.0});
  const double dy = std::max({r.y0, -r.y1, 0.0});
  return std::hypot(dx, dy);
}

double max_radius(const Rect& r) {
  return std::hypot(std::max(std::abs(r.x0), std::abs(r.x1)),
                    std::max(std::abs(r.y0), std::abs(r.y1)));
}

double min_distance(const Rect& r, const Point2& p) {
  return min_radius({r.x0 - p[0], r.x1 - p[0], r.y0 - p[1], r.y1 - p[1]});
}

double max_distance(const Rect& r, const Point2& p) {
  return max_radius({r.x0 - p[0], r.x1 - p[0], r.y0 - p[1], r.y1 - p[1]});
}

void add_split(std::vector<double>& cuts, double v, double lo, double hi, double eps) {
  if (v > lo + eps && v < hi - eps) cuts.push_back(v);
}

}  // namespace

cplx coeff_2d(const KernelSpec& kernel, const PmlSetup& pml, double h, Index2 n, Index2 m,
              const AssemblyOptions& opt) {
  if (m == n) throw std::invalid_argument("coeff_2d requires m != n");
  const double R = kernel.horizon();
  const Point2 xn{n[0] * h, n[1] * h}, xm{m[0] * h, m[1] * h};
  const double w_nm = weight_2d({xm[0] - xn[0], xm[1] - xn[1]});

  auto integrand = [&](double y1, double y2) -> cplx {
    const double phi = (1.0 - std::abs(y1 - xm[0]) / h) * (1.0 - std::abs(y2 - xm[1]) / h);
    const Point2 s{y1 - xn[0], y2 - xn[1]};
    if (phi <= 0.0 || s[0] * s[0] + s[1] * s[1] > R * R) return 0.0;
    const Stretch2D sa = pml.map(Point2{0.5 * (xm[0] + y1), 0.5 * (xm[1] + y2)});
    const Stretch2D sb = pml.map(Point2{xn[0] + 0.5 * (xm[0] - y1), xn[1] + 0.5 * (xm[1] - y2)});
    const std::array<cplx, 2> d{sa.x_tilde[0] - sb.x_tilde[0], sa.x_tilde[1] - sb.x_tilde[1]};
    return phi * weight_2d(s) * eval_complex(kernel, d) * sa.jacobian * sb.jacobian;
  };

  quad::Options qopt;
  qopt.rel_tol = opt.rel_tol;
  // Floor relative to the largest coefficients of the row, not to this one.
  qopt.abs_tol = opt.rel_tol * coefficient_scale(kernel, h) * w_nm;

  std::vector<double> rho_breaks;
  if (kernel.is_piecewise_constant()) rho_breaks.push_back(kernel.delta);
  const double grade_q = grading_exponent(kernel);
  const double eps = 1e-12 * h;

  // Sub-cells: the four support cells, split along stretch interface lines.
  std::vector<Rect> cells;
  for (int c1 = 0; c1 < 2; ++c1) {
    for (int c2 = 0; c2 < 2; ++c2) {
      const Rect cell{xm[0] + (c1 - 1) * h, xm[0] + c1 * h, xm[1] + (c2 - 1) * h, xm[1] + c2 * h};
      if (min_distance(cell, xn) >= R) continue;
      std::vector<double> cx{cell.x0, cell.x1}, cy{cell.y0, cell.y1};
      if (pml.style == PmlStyle::Cartesian) {
        for (int axis = 0; axis < 2; ++axis) {
          const double L = (axis == 0 ? pml.x1 : pml.x2).profile.inner_extent;
          auto& cuts = axis == 0 ? cx : cy;
          const double lo = axis == 0 ? cell.x0 : cell.y0, hi = axis == 0 ? cell.x1 : cell.y1;
          for (double sgn : {1.0, -1.0}) {
            add_split(cuts, 2.0 * sgn * L - xm[axis], lo, hi, eps);
            add_split(cuts, xm[axis] + 2.0 * xn[axis] - 2.0 * sgn * L, lo, hi, eps);
          }
        }
        std::sort(cx.begin(), cx.end());
        std::sort(cy.begin(), cy.end());
      }
      for (std::size_t i = 0; i + 1 < cx.size(); ++i)
        for (std::size_t j = 0; j + 1 < cy.size(); ++j) cells.push_back({cx[i], cx[i + 1], cy[j], cy[j + 1]});
    }
  }

  quad::Options cell_opt = qopt;
  cell_opt.abs_tol = qopt.abs_tol / std::max<std::size_t>(1, cells.size());
  cplx total = 0.0;
  bool ok = true;
  for (const Rect& cell : cells) {
    const double dmin = min_distance(cell, xn);
    if (dmin >= R) continue;
    const double dmax = max_distance(cell, xn);
    bool polar_crossing = false;
    std::vector<Circle> kinks;
    if (pml.style == PmlStyle::Polar) {
      const double lr = pml.x1.profile.inner_extent;
      const Rect ab = affine_box({0.5 * xm[0], 0.5 * xm[1]}, 0.5, cell);
      const Rect bb = affine_box({xn[0] + 0.5 * xm[0], xn[1] + 0.5 * xm[1]}, -0.5, cell);
      polar_crossing = (min_radius(ab) < lr && max_radius(ab) > lr) ||
                       (min_radius(bb) < lr && max_radius(bb) > lr);
      // Images of the interface circle |x| = L under y -> a(y) and y -> b(y).
      if (polar_crossing)
        kinks = {{{-xm[0], -xm[1]}, 2.0 * lr}, {{xm[0] + 2.0 * xn[0], xm[1] + 2.0 * xn[1]}, 2.0 * lr}};
    }
    bool ring = false;
    for (double rb : rho_breaks) ring = ring || (dmin < rb && dmax > rb);
    const bool touches = dmin <= eps;
    if (touches || dmax > R || ring) {
      auto r = integrate_polar_cell(integrand, cell, xn, R, rho_breaks, grade_q, kinks, cell_opt);
      total += r.value;
      ok = ok && r.converged;
    } else if (polar_crossing) {
      auto r = integrate_across_circles(integrand, cell, kinks, cell_opt);
      total += r.value;
      ok = ok && r.converged;
    } else {
      total += quad::gauss8x8(integrand, cell.x0, cell.x1, cell.y0, cell.y1);
    }
  }
  if (!ok) throw QuadratureError(context("coefficient quadrature", index_string(n), index_string(m)));
  return -total / w_nm;
}

RowStencil1D row_stencil_1d(const KernelSpec& kernel, const PmlSetup& pml, double h, int n,
                            const AssemblyOptions& opt) {
  const int reach = stencil_reach(kernel, h);
  RowStencil1D st;
  for (int j = -reach; j <= reach; ++j) {
    if (j == 0) continue;
    const cplx v = coeff_1d(kernel, pml, h, n, n + j, opt);
    if (v == cplx(0.0)) continue;
    st.offsets.push_back(j);
    st.values.push_back(v);
    st.off_sum += v;
  }
  return st;
}

RowStencil2D row_stencil_2d(const KernelSpec& kernel, const PmlSetup& pml, double h, Index2 n,
                            const AssemblyOptions& opt) {
  const int reach = stencil_reach(kernel, h);
  const double R = kernel.horizon();
  RowStencil2D st;
  for (int j2 = -reach; j2 <= reach; ++j2) {
    for (int j1 = -reach; j1 <= reach; ++j1) {
      if (j1 == 0 && j2 == 0) continue;
      const double gx = std::max(std::abs(j1) - 1, 0) * h, gy = std::max(std::abs(j2) - 1, 0) * h;
      if (std::hypot(gx, gy) >= R) continue;
      const cplx v = coeff_2d(kernel, pml, h, n, {n[0] + j1, n[1] + j2}, opt);
      if (v == cplx(0.0)) continue;
      st.offsets.push_back({j1, j2});
      st.values.push_back(v);
      st.off_sum += v;
    }
  }
  return st;
}

namespace {

/// Runs job(i) for i in [0, count) on up to `threads` workers and rethrows
/// the first failure.
template <class Job>
void parallel_for(std::size_t count, int threads, Job job) {
  unsigned workers = threads > 0 ? static_cast<unsigned>(threads)
                                 : std::max(1u, std::thread::hardware_concurrency());
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, count));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) job(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          job(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
          next = count;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

void check_source(const Source& f, double l) {
  if (f.support_radius() > l * (1.0 + 1e-12))
    throw ConfigError("source support radius " + std::to_string(f.support_radius()) +
                      " exceeds the physical domain (" + std::to_string(l) + ")");
}

void check_horizon(const KernelSpec& kernel, double delta_b) {
  if (kernel.horizon() > delta_b * (1.0 + 1e-9))
    throw ConfigError("kernel horizon " + std::to_string(kernel.horizon()) +
                      " exceeds the boundary layer width " + std::to_string(delta_b));
}

void finish_bandwidth(SparseComplexSystem& sys) {
  sys.lower_bandwidth = sys.upper_bandwidth = 0;
  for (int r = 0; r < sys.matrix.outerSize(); ++r) {
    for (SparseComplexSystem::Matrix::InnerIterator it(sys.matrix, r); it; ++it) {
      sys.lower_bandwidth = std::max(sys.lower_bandwidth, r - static_cast<int>(it.col()));
      sys.upper_bandwidth = std::max(sys.upper_bandwidth, static_cast<int>(it.col()) - r);
    }
  }
}

double tail_term(const KernelSpec& kernel, const AssemblyOptions& opt) {
  if (!kernel.is_fractional() || !opt.tail_correction) return 0.0;
  return tail_mass(kernel, kernel.horizon());
}

}  // namespace

Eigen::VectorXcd SparseComplexSystem::scatter(const Eigen::VectorXcd& x) const {
  Eigen::VectorXcd out = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(node_unknown.size()));
  for (std::size_t u = 0; u < unknown_node.size(); ++u)
    out[static_cast<Eigen::Index>(unknown_node[u])] = x[static_cast<Eigen::Index>(u)];
  return out;
}

SparseComplexSystem assemble(const KernelSpec& kernel, const PmlSetup& pml, const Grid1D& grid,
                             const Source& f, double k, const AssemblyOptions& opt) {
  kernel.validate();
  if (kernel.dimension() != 1) throw ConfigError("1D grid needs a 1D kernel");
  if (pml.style == PmlStyle::Polar) throw ConfigError("polar PML is two-dimensional");
  if (pml.style != PmlStyle::None) pml.x1.validate();
  check_horizon(kernel, grid.delta_b);
  check_source(f, grid.l);

  const double h = grid.h;
  const int reach = stencil_reach(kernel, h);
  const double L = pml.style == PmlStyle::None ? std::numeric_limits<double>::infinity()
                                                : pml.x1.profile.inner_extent;

  SparseComplexSystem sys;
  sys.dimension = 1;
  sys.node_unknown.assign(grid.size(), -1);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (grid.classes[i] == NodeClass::BoundaryLayer) continue;
    sys.node_unknown[i] = static_cast<int>(sys.unknown_node.size());
    sys.unknown_node.push_back(i);
  }

  // Rows whose evaluation points all stay unstretched share one stencil;
  // the rest are reduced to |n| by reflection.
  auto key_of = [&](int n) {
    return (std::abs(n) + reach + 1) * h <= L ? -1 : std::abs(n);
  };
  std::map<int, std::size_t> key_index;
  std::vector<int> keys;
  for (std::size_t u : sys.unknown_node) {
    const int key = key_of(grid.lattice(u));
    if (key_index.emplace(key, keys.size()).second) keys.push_back(key);
  }
  std::vector<RowStencil1D> stencils(keys.size());
  parallel_for(keys.size(), opt.threads, [&](std::size_t i) {
    stencils[i] = row_stencil_1d(kernel, pml, h, std::max(keys[i], 0), opt);
  });
  sys.distinct_stencils = keys.size();

  const double tail = tail_term(kernel, opt);
  const auto n_unknowns = static_cast<Eigen::Index>(sys.size());
  sys.rhs = Eigen::VectorXcd::Zero(n_unknowns);
  std::vector<Eigen::Triplet<cplx, int>> triplets;
  triplets.reserve(sys.size() * static_cast<std::size_t>(2 * reach + 1));
  for (std::size_t u = 0; u < sys.size(); ++u) {
    const std::size_t node = sys.unknown_node[u];
    const int n = grid.lattice(node);
    const RowStencil1D& st = stencils[key_index.at(key_of(n))];
    const int sign = n < 0 ? -1 : 1;
    const int row = static_cast<int>(u);
    for (std::size_t e = 0; e < st.offsets.size(); ++e) {
      const auto col_node = grid.find(n + sign * st.offsets[e]);
      if (!col_node) continue;
      const int col = sys.node_unknown[*col_node];
      if (col >= 0) triplets.emplace_back(row, col, st.values[e]);
    }
    const cplx alpha = pml.map(n * h).alpha;
    triplets.emplace_back(row, row, -st.off_sum - k * k * alpha + tail);
    if (grid.classes[node] == NodeClass::Interior) sys.rhs[row] = f(n * h);
  }
  sys.matrix.resize(n_unknowns, n_unknowns);
  sys.matrix.setFromTriplets(triplets.begin(), triplets.end());
  sys.matrix.makeCompressed();
  finish_bandwidth(sys);
  return sys;
}

namespace {

struct RowSymmetry {
  Index2 key;  // per-axis |n_i| or -1 for translation-invariant axes
  bool swap = false;
  int s1 = 1, s2 = 1;
};

}  // namespace

SparseComplexSystem assemble(const KernelSpec& kernel, const PmlSetup& pml, const Grid2D& grid,
                             const Source& f, double k, const AssemblyOptions& opt) {
  kernel.validate();
  if (kernel.dimension() != 2) throw ConfigError("2D grid needs a 2D kernel");
  if (pml.style != PmlStyle::None) pml.x1.validate();
  if (pml.style == PmlStyle::Cartesian) pml.x2.validate();
  if (pml.style == PmlStyle::Polar && grid.shape != DomainShape::Disk)
    throw ConfigError("polar PML needs a disk domain");
  if (pml.style == PmlStyle::Cartesian && grid.shape != DomainShape::Square)
    throw ConfigError("Cartesian PML needs a square domain");
  check_horizon(kernel, grid.delta_b);
  check_source(f, grid.l);

  const double h = grid.h;
  const int reach = stencil_reach(kernel, h);
  const bool equal_axes = pml.style != PmlStyle::Cartesian || pml.x1 == pml.x2;

  auto symmetry_of = [&](int n1, int n2) {
    RowSymmetry s;
    s.s1 = n1 < 0 ? -1 : 1;
    s.s2 = n2 < 0 ? -1 : 1;
    const int a1 = std::abs(n1), a2 = std::abs(n2);
    switch (pml.style) {
      case PmlStyle::None:
        s.key = {-1, -1};
        break;
      case PmlStyle::Cartesian:
        s.key = {(a1 + reach + 1) * h <= pml.x1.profile.inner_extent ? -1 : a1,
                 (a2 + reach + 1) * h <= pml.x2.profile.inner_extent ? -1 : a2};
        break;
      case PmlStyle::Polar: {
        const double reach_r = std::hypot(a1, a2) + (reach + 1) * std::sqrt(2.0);
        s.key = reach_r * h <= pml.x1.profile.inner_extent ? Index2{-1, -1} : Index2{a1, a2};
        break;
      }
    }
    if (equal_axes && s.key[0] < s.key[1]) {
      std::swap(s.key[0], s.key[1]);
      s.swap = true;
    }
    return s;
  };

  SparseComplexSystem sys;
  sys.dimension = 2;
  sys.node_unknown.assign(grid.size(), -1);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (grid.nodes[i].cls == NodeClass::BoundaryLayer) continue;
    sys.node_unknown[i] = static_cast<int>(sys.unknown_node.size());
    sys.unknown_node.push_back(i);
  }

  std::map<Index2, std::size_t> key_index;
  std::vector<Index2> keys;
  for (std::size_t u : sys.unknown_node) {
    const auto& nd = grid.nodes[u];
    const Index2 key = symmetry_of(nd.n1, nd.n2).key;
    if (key_index.emplace(key, keys.size()).second) keys.push_back(key);
  }
  std::vector<RowStencil2D> stencils(keys.size());
  parallel_for(keys.size(), opt.threads, [&](std::size_t i) {
    stencils[i] = row_stencil_2d(kernel, pml, h, {std::max(keys[i][0], 0), std::max(keys[i][1], 0)}, opt);
  });
  sys.distinct_stencils = keys.size();

  const double tail = tail_term(kernel, opt);
  const auto n_unknowns = static_cast<Eigen::Index>(sys.size());
  sys.rhs = Eigen::VectorXcd::Zero(n_unknowns);
  std::vector<Eigen::Triplet<cplx, int>> triplets;
  for (std::size_t u = 0; u < sys.size(); ++u) {
    const auto& nd = grid.nodes[sys.unknown_node[u]];
    const RowSymmetry sym = symmetry_of(nd.n1, nd.n2);
    const RowStencil2D& st = stencils[key_index.at(sym.key)];
    const int row = static_cast<int>(u);
    for (std::size_t e = 0; e < st.offsets.size(); ++e) {
      Index2 o = st.offsets[e];
      if (sym.swap) std::swap(o[0], o[1]);
      const auto col_node = grid.find(nd.n1 + sym.s1 * o[0], nd.n2 + sym.s2 * o[1]);
      if (!col_node) continue;
      const int col = sys.node_unknown[*col_node];
      if (col >= 0) triplets.emplace_back(row, col, st.values[e]);
    }
    const Point2 x = grid.position(nd);
    triplets.emplace_back(row, row, -st.off_sum - k * k * pml.map(x).jacobian + tail);
    if (nd.cls == NodeClass::Interior) sys.rhs[row] = f(x);
  }
  sys.matrix.resize(n_unknowns, n_unknowns);
  sys.matrix.setFromTriplets(triplets.begin(), triplets.end());
  sys.matrix.makeCompressed();
  finish_bandwidth(sys);
  return sys;
}

void write_matrix_dump(const SparseComplexSystem& sys, const std::string& prefix,
                       nlohmann::json header) {
  std::ofstream coo(prefix + ".coo");
  if (!coo) throw std::runtime_error("cannot write " + prefix + ".coo");
  coo << std::setprecision(17);
  for (int r = 0; r < sys.matrix.outerSize(); ++r)
    for (SparseComplexSystem::Matrix::InnerIterator it(sys.matrix, r); it; ++it)
      coo << r << ' ' << it.col() << ' ' << it.value().real() << ' ' << it.value().imag() << '\n';

  header["dimension"] = sys.dimension;
  header["unknowns"] = sys.size();
  header["nonzeros"] = sys.matrix.nonZeros();
  header["lower_bandwidth"] = sys.lower_bandwidth;
  header["upper_bandwidth"] = sys.upper_bandwidth;
  header["format"] = "row col re im, 0-based";
  std::ofstream js(prefix + ".json");
  if (!js) throw std::runtime_error("cannot write " + prefix + ".json");
  js << header.dump(2) << '\n';
}

}  // namespace nlhelm
