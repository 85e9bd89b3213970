#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>
#include <json.hpp>

#include "nlhelm/grid.hpp"
#include "nlhelm/kernel.hpp"
#include "nlhelm/source.hpp"
#include "nlhelm/stretch.hpp"

namespace nlhelm {

using Index2 = std::array<int, 2>;

struct AssemblyOptions {
  /// Relative tolerance for each coefficient integral. An absolute floor of
  /// rel_tol times the natural diagonal scale (1e-3 of that in 1D) applies
  /// as well.
  double rel_tol = 1e-10;
  /// Worker threads for stencil evaluation; 0 uses the hardware count.
  int threads = 1;
  /// Adds tail_mass(kernel, truncation radius) to fractional diagonals.
  bool tail_correction = true;
};

/// Off-diagonal stencil of one row: offsets m - n with coefficients, over all
/// lattice offsets within reach (including ones that leave the grid).
template <class Offset>
struct RowStencil {
  std::vector<Offset> offsets;
  std::vector<cplx> values;
  cplx off_sum{0.0, 0.0};  // sum of values; the diagonal is -off_sum
};

using RowStencil1D = RowStencil<int>;
using RowStencil2D = RowStencil<Index2>;

/// Largest |m - n| (1D) or |m - n|_inf (2D) with a possibly nonzero coefficient.
int stencil_reach(const KernelSpec& kernel, double h);

/// w(s) = |s|_2^2 / |s|_1, with w(0) = 0.
double weight_2d(const Point2& s);

/// Natural magnitude of diagonal entries, used to scale absolute tolerances.
double coefficient_scale(const KernelSpec& kernel, double h);

/// a~_{n,m} for lattice indices n != m on a mesh of size h.
cplx coeff_1d(const KernelSpec& kernel, const PmlSetup& pml, double h, int n, int m,
              const AssemblyOptions& opt = {});
cplx coeff_2d(const KernelSpec& kernel, const PmlSetup& pml, double h, Index2 n, Index2 m,
              const AssemblyOptions& opt = {});

RowStencil1D row_stencil_1d(const KernelSpec& kernel, const PmlSetup& pml, double h, int n,
                            const AssemblyOptions& opt = {});
RowStencil2D row_stencil_2d(const KernelSpec& kernel, const PmlSetup& pml, double h, Index2 n,
                            const AssemblyOptions& opt = {});

/// Truncated PML system over the Interior and Pml nodes of a grid. Unknowns
/// follow the grid node order with boundary-layer nodes skipped.
struct SparseComplexSystem {
  using Matrix = Eigen::SparseMatrix<cplx, Eigen::RowMajor, int>;

  int dimension = 1;
  Matrix matrix;
  Eigen::VectorXcd rhs;
  std::vector<std::size_t> unknown_node;  // unknown -> grid node
  std::vector<int> node_unknown;          // grid node -> unknown or -1
  int lower_bandwidth = 0;
  int upper_bandwidth = 0;
  std::size_t distinct_stencils = 0;

  std::size_t size() const { return unknown_node.size(); }
  /// Field on all grid nodes, zero on the boundary layer.
  Eigen::VectorXcd scatter(const Eigen::VectorXcd& x) const;
};

SparseComplexSystem assemble(const KernelSpec& kernel, const PmlSetup& pml, const Grid1D& grid,
                             const Source& f, double k, const AssemblyOptions& opt = {});
SparseComplexSystem assemble(const KernelSpec& kernel, const PmlSetup& pml, const Grid2D& grid,
                             const Source& f, double k, const AssemblyOptions& opt = {});

/// Writes `<prefix>.coo` (row col re im per line, 0-based) and `<prefix>.json`
/// (the given header plus sizes and bandwidths).
void write_matrix_dump(const SparseComplexSystem& sys, const std::string& prefix,
                       nlohmann::json header = {});

}  // namespace nlhelm
