#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <vector>

#include "nlhelm/types.hpp"

namespace nlhelm::quad {

/// Gauss-Legendre rule of order 8 on [-1, 1].
inline constexpr std::array<double, 8> kGL8Nodes = {
    -0.9602898564975362316835609, -0.7966664774136267395915539,
    -0.5255324099163289858177390, -0.1834346424956498049394761,
    0.1834346424956498049394761,  0.5255324099163289858177390,
    0.7966664774136267395915539,  0.9602898564975362316835609};
inline constexpr std::array<double, 8> kGL8Weights = {
    0.1012285362903762591525314, 0.2223810344533744705443560,
    0.3137066458778872873379622, 0.3626837833783619829651504,
    0.3626837833783619829651504, 0.3137066458778872873379622,
    0.2223810344533744705443560, 0.1012285362903762591525314};

struct Options {
  double rel_tol = 1e-10;
  double abs_tol = 0.0;
  int max_depth = 60;
};

template <class T>
struct Result {
  T value{};
  double error = 0.0;
  bool converged = true;
  int evaluations = 0;
};

template <class F>
auto gauss8(F&& f, double a, double b) {
  const double half = 0.5 * (b - a);
  const double mid = 0.5 * (a + b);
  decltype(f(mid)) sum{};
  for (std::size_t i = 0; i < kGL8Nodes.size(); ++i)
    sum += kGL8Weights[i] * f(mid + half * kGL8Nodes[i]);
  return sum * half;
}

template <class F>
auto gauss8x8(F&& f, double ax, double bx, double ay, double by) {
  const double hx = 0.5 * (bx - ax), mx = 0.5 * (ax + bx);
  const double hy = 0.5 * (by - ay), my = 0.5 * (ay + by);
  decltype(f(mx, my)) sum{};
  for (std::size_t i = 0; i < kGL8Nodes.size(); ++i) {
    const double x = mx + hx * kGL8Nodes[i];
    decltype(f(mx, my)) row{};
    for (std::size_t j = 0; j < kGL8Nodes.size(); ++j)
      row += kGL8Weights[j] * f(x, my + hy * kGL8Nodes[j]);
    sum += kGL8Weights[i] * row;
  }
  return sum * (hx * hy);
}

namespace detail {

/// Differences below this many ulps of integral |f| are treated as rounding
/// noise. Integrands built from exponentials of arguments near the clamp
/// (|x| ~ 700) carry relative noise of order |x| ulps.
inline constexpr double kRoundoffUlps = 1e4;

/// GL8 on [a, b] together with the matching estimate of integral |f|.
template <class F>
auto gauss8_with_magnitude(F& f, double a, double b, double& magnitude) {
  const double half = 0.5 * (b - a);
  const double mid = 0.5 * (a + b);
  decltype(f(mid)) sum{};
  double mag = 0.0;
  for (std::size_t i = 0; i < kGL8Nodes.size(); ++i) {
    const auto v = f(mid + half * kGL8Nodes[i]);
    sum += kGL8Weights[i] * v;
    mag += kGL8Weights[i] * std::abs(v);
  }
  magnitude = mag * half;
  return sum * half;
}

template <class F, class T>
void adapt1d(F& f, double a, double b, T whole, double tol_per_length, int depth,
             const Options& opt, Result<T>& out) {
  const double m = 0.5 * (a + b);
  double mag_left = 0.0, mag_right = 0.0;
  const T left = gauss8_with_magnitude(f, a, m, mag_left);
  const T right = gauss8_with_magnitude(f, m, b, mag_right);
  out.evaluations += 16;
  const T refined = left + right;
  const double err = std::abs(refined - whole);
  const double floor =
      std::max(kRoundoffUlps * 2.220446049250313e-16, opt.rel_tol) * (mag_left + mag_right);
  const double allowed = std::max(tol_per_length * (b - a), floor);
  if (err <= allowed || depth >= opt.max_depth || m <= a || m >= b) {
    if (err > allowed) out.converged = false;
    out.value += refined;
    out.error += err;
    return;
  }
  adapt1d(f, a, m, left, tol_per_length, depth + 1, opt, out);
  adapt1d(f, m, b, right, tol_per_length, depth + 1, opt, out);
}

}  // namespace detail

/// Adaptive bisection on [a, b] comparing GL8 on an interval with GL8 on its
/// halves. The tolerance max(abs_tol, rel_tol * |first estimate|) is spread
/// over the interval in proportion to length. A subinterval is also accepted
/// once its error is below rel_tol times its integral of |f|, so the total
/// error never needs to beat rel_tol * integral |f|.
template <class F>
auto integrate(F&& f, double a, double b, const Options& opt = {}) {
  using T = decltype(f(a));
  Result<T> out;
  if (!(b > a)) return out;
  const T whole = gauss8(f, a, b);
  out.evaluations += 8;
  const double tol = std::max(opt.abs_tol, opt.rel_tol * std::abs(whole));
  detail::adapt1d(f, a, b, whole, tol / (b - a), 0, opt, out);
  return out;
}

/// Adaptive integration over the breakpoint-separated pieces of [a, b].
/// Breakpoints outside (a, b) are ignored.
template <class F>
auto integrate_pieces(F&& f, double a, double b, std::vector<double> breaks,
                      const Options& opt = {}) {
  using T = decltype(f(a));
  breaks.push_back(a);
  breaks.push_back(b);
  std::sort(breaks.begin(), breaks.end());
  const double eps = 1e-14 * std::max(1.0, std::abs(b - a));
  Result<T> out;
  double lo = a;
  for (double x : breaks) {
    if (x <= lo + eps) continue;
    if (x > b) break;
    auto piece = integrate(f, lo, x, opt);
    out.value += piece.value;
    out.error += piece.error;
    out.evaluations += piece.evaluations;
    out.converged = out.converged && piece.converged;
    lo = x;
  }
  return out;
}

/// Semi-infinite integral of a decaying integrand on [a, inf): integrates
/// panels of growing length until a panel contributes less than the
/// tolerance twice in a row.
template <class F>
auto integrate_to_infinity(F&& f, double a, double initial_panel, const Options& opt = {},
                           int max_panels = 200) {
  using T = decltype(f(a));
  Result<T> out;
  double lo = a;
  double len = initial_panel;
  int small_in_a_row = 0;
  for (int p = 0; p < max_panels; ++p) {
    auto piece = integrate(f, lo, lo + len, opt);
    out.value += piece.value;
    out.error += piece.error;
    out.evaluations += piece.evaluations;
    out.converged = out.converged && piece.converged;
    const double scale = std::max(opt.abs_tol, opt.rel_tol * std::abs(out.value));
    small_in_a_row = std::abs(piece.value) <= scale ? small_in_a_row + 1 : 0;
    if (small_in_a_row >= 2) return out;
    lo += len;
    len *= 1.5;
  }
  out.converged = false;
  return out;
}

}  // namespace nlhelm::quad
