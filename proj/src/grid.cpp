#include "nlhelm/grid.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <string>

namespace nlhelm {

std::string_view to_string(NodeClass c) {
  switch (c) {
    case NodeClass::Interior: return "interior";
    case NodeClass::Pml: return "pml";
    case NodeClass::BoundaryLayer: return "boundary";
  }
  return "unknown";
}

std::string_view to_string(DomainShape s) {
  return s == DomainShape::Square ? "square" : "disk";
}

int commensurate_cells(double length, double h, std::string_view what) {
  if (!(h > 0.0)) throw ConfigError("mesh size must be positive");
  if (!(length > 0.0)) throw ConfigError(std::string(what) + " must be positive");
  const double ratio = length / h;
  const double rounded = std::round(ratio);
  if (rounded < 1.0 || std::abs(ratio - rounded) > 1e-12 * std::max(1.0, ratio))
    throw ConfigError(std::string(what) + " = " + std::to_string(length) +
                      " is not an integer multiple of h = " + std::to_string(h));
  return static_cast<int>(rounded);
}

namespace {

int boundary_cells(double delta_b, double h) {
  if (!(delta_b > 0.0)) throw ConfigError("boundary layer width must be positive");
  return static_cast<int>(std::ceil(delta_b / h - 1e-9));
}

}  // namespace

std::optional<NodeClass> Grid1D::classify(int n) const {
  const int a = std::abs(n);
  if (a <= m_inner) return NodeClass::Interior;
  if (a <= m_inner + m_pml) return NodeClass::Pml;
  if (a <= half_count()) return NodeClass::BoundaryLayer;
  return std::nullopt;
}

std::optional<std::size_t> Grid1D::find(int n) const {
  if (std::abs(n) > half_count()) return std::nullopt;
  return static_cast<std::size_t>(n + half_count());
}

Grid1D build_grid_1d(double h, double l, double d_pml, double delta_b) {
  Grid1D g;
  g.h = h;
  g.l = l;
  g.d_pml = d_pml;
  g.m_inner = commensurate_cells(l, h, "l");
  g.m_pml = commensurate_cells(d_pml, h, "d_pml");
  g.m_boundary = boundary_cells(delta_b, h);
  g.delta_b = g.m_boundary * h;
  const int n = g.half_count();
  g.classes.reserve(2 * n + 1);
  for (int i = -n; i <= n; ++i) g.classes.push_back(*g.classify(i));
  return g;
}

std::optional<NodeClass> Grid2D::classify(int n1, int n2) const {
  const int inner = m_inner, pml = m_inner + m_pml, outer = half_count();
  if (shape == DomainShape::Square) {
    const int a = std::max(std::abs(n1), std::abs(n2));
    if (a <= inner) return NodeClass::Interior;
    if (a <= pml) return NodeClass::Pml;
    if (a <= outer) return NodeClass::BoundaryLayer;
    return std::nullopt;
  }
  const long r2 = static_cast<long>(n1) * n1 + static_cast<long>(n2) * n2;
  if (r2 <= static_cast<long>(inner) * inner) return NodeClass::Interior;
  if (r2 <= static_cast<long>(pml) * pml) return NodeClass::Pml;
  if (r2 <= static_cast<long>(outer) * outer) return NodeClass::BoundaryLayer;
  return std::nullopt;
}

std::optional<std::size_t> Grid2D::find(int n1, int n2) const {
  const int n = half_count();
  if (std::abs(n1) > n || std::abs(n2) > n) return std::nullopt;
  const int side = 2 * n + 1;
  const int id = lookup[static_cast<std::size_t>(n2 + n) * side + (n1 + n)];
  if (id < 0) return std::nullopt;
  return static_cast<std::size_t>(id);
}

Grid2D build_grid_2d(double h, DomainShape shape, double l, double d_pml, double delta_b) {
  Grid2D g;
  g.h = h;
  g.shape = shape;
  g.l = l;
  g.d_pml = d_pml;
  g.m_inner = commensurate_cells(l, h, shape == DomainShape::Square ? "l" : "l_r");
  g.m_pml = commensurate_cells(d_pml, h, "d_pml");
  g.m_boundary = boundary_cells(delta_b, h);
  g.delta_b = g.m_boundary * h;
  const int n = g.half_count();
  const int side = 2 * n + 1;
  g.lookup.assign(static_cast<std::size_t>(side) * side, -1);
  for (int n2 = -n; n2 <= n; ++n2) {
    for (int n1 = -n; n1 <= n; ++n1) {
      const auto cls = g.classify(n1, n2);
      if (!cls) continue;
      g.lookup[static_cast<std::size_t>(n2 + n) * side + (n1 + n)] =
          static_cast<int>(g.nodes.size());
      g.nodes.push_back({n1, n2, *cls});
    }
  }
  return g;
}

}  // namespace nlhelm
