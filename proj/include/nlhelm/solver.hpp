#pragma once

#include <cstddef>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "nlhelm/assembly.hpp"

namespace nlhelm {

enum class SolverMethod { Auto, Banded, SparseLU, Gmres };

std::string_view to_string(SolverMethod m);
SolverMethod parse_solver_method(std::string_view name);

struct SolverOptions {
  SolverMethod method = SolverMethod::Auto;  // banded in 1D, sparse LU in 2D
  double tol = 1e-10;
  int max_iters = 5000;  // GMRES inner iterations in total
  int restart = 50;
  bool allow_zero_rhs = false;
  int refinement_steps = 3;  // iterative refinement for the direct paths
};

struct SolveReport {
  Eigen::VectorXcd solution;  // per unknown
  Eigen::VectorXcd field;     // per grid node, zero on the boundary layer
  double relative_residual = 0.0;
  SolverMethod method = SolverMethod::Auto;
  int iterations = 0;
  std::size_t factor_nonzeros = 0;
  double seconds = 0.0;
};

SolveReport solve(const SparseComplexSystem& sys, const SolverOptions& opt = {});

/// Complex banded LU with partial pivoting. Rows store columns
/// [i - kl, i + kl + ku] so that pivoting fill fits.
class BandedLU {
 public:
  BandedLU(const SparseComplexSystem::Matrix& a, int kl, int ku);
  Eigen::VectorXcd solve(const Eigen::VectorXcd& b) const;
  std::size_t stored_entries() const { return band_.size(); }

 private:
  cplx& at(Eigen::Index r, Eigen::Index c) { return band_[r * width_ + (c - r + kl_)]; }
  const cplx& at(Eigen::Index r, Eigen::Index c) const { return band_[r * width_ + (c - r + kl_)]; }

  Eigen::Index n_ = 0;
  int kl_ = 0;
  int ku_ = 0;
  Eigen::Index width_ = 0;
  std::vector<cplx> band_;
  std::vector<Eigen::Index> pivots_;
};

/// Zero-fill incomplete LU on the sparsity pattern of a row-major matrix.
class Ilu0 {
 public:
  explicit Ilu0(const SparseComplexSystem::Matrix& a);
  Eigen::VectorXcd apply(const Eigen::VectorXcd& r) const;

 private:
  SparseComplexSystem::Matrix lu_;
  std::vector<int> diag_;
};

/// Right-preconditioned restarted GMRES. Throws SolverError on stagnation
/// (a restart cycle that leaves the true residual above 99% of its start) or
/// when the iteration budget runs out.
Eigen::VectorXcd gmres(const SparseComplexSystem::Matrix& a, const Eigen::VectorXcd& b,
                       const Ilu0& precond, double tol, int restart, int max_iters, int& iterations);

/// UMFPACK sparse LU of a complex matrix.
Eigen::VectorXcd sparse_lu_solve(const SparseComplexSystem::Matrix& a, const Eigen::VectorXcd& b,
                                 int refinement_steps, double tol, std::size_t& factor_nonzeros);

}  // namespace nlhelm
