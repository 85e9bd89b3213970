#pragma once

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "nlhelm/types.hpp"

namespace nlhelm {

enum class NodeClass : std::uint8_t { Interior, Pml, BoundaryLayer };

std::string_view to_string(NodeClass c);

/// Uniform grid on [-l - d_pml - delta_b, l + d_pml + delta_b] with nodes
/// x = n h, n in [-N, N]. Interface nodes belong to the inner region.
struct Grid1D {
  double h = 0.0;
  double l = 0.0;
  double d_pml = 0.0;
  double delta_b = 0.0;  // rounded up to whole cells
  int m_inner = 0;       // l / h
  int m_pml = 0;         // d_pml / h
  int m_boundary = 0;    // ceil(delta_b / h)
  std::vector<NodeClass> classes;

  int half_count() const { return m_inner + m_pml + m_boundary; }
  std::size_t size() const { return classes.size(); }
  int lattice(std::size_t i) const { return static_cast<int>(i) - half_count(); }
  double x(std::size_t i) const { return lattice(i) * h; }
  /// Class of lattice index n; nullopt outside the grid.
  std::optional<NodeClass> classify(int n) const;
  std::optional<std::size_t> find(int n) const;
};

Grid1D build_grid_1d(double h, double l, double d_pml, double delta_b);

enum class DomainShape { Square, Disk };

std::string_view to_string(DomainShape s);

/// Cartesian lattice x = h (n1, n2). Square domains classify by the sup-norm,
/// disks by the Euclidean norm and drop lattice points outside the boundary
/// layer.
struct Grid2D {
  struct Node {
    int n1;
    int n2;
    NodeClass cls;
  };

  double h = 0.0;
  DomainShape shape = DomainShape::Square;
  double l = 0.0;  // half-width for squares, radius for disks
  double d_pml = 0.0;
  double delta_b = 0.0;
  int m_inner = 0;
  int m_pml = 0;
  int m_boundary = 0;
  std::vector<Node> nodes;  // n2-major lexicographic order
  std::vector<int> lookup;  // (2N+1)^2 lattice -> node id or -1

  int half_count() const { return m_inner + m_pml + m_boundary; }
  std::size_t size() const { return nodes.size(); }
  Point2 position(const Node& n) const { return {n.n1 * h, n.n2 * h}; }
  Point2 position(std::size_t i) const { return position(nodes[i]); }
  std::optional<NodeClass> classify(int n1, int n2) const;
  std::optional<std::size_t> find(int n1, int n2) const;
};

Grid2D build_grid_2d(double h, DomainShape shape, double l, double d_pml, double delta_b);

/// Integer cell count for a length that must be a multiple of h.
int commensurate_cells(double length, double h, std::string_view what);

}  // namespace nlhelm
