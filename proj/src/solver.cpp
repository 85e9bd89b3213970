#include "nlhelm/solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <memory>
#include <string>

#include <umfpack.h>

namespace nlhelm {

namespace {

constexpr double kPivotThreshold = 1e-14;

double residual_norm(const SparseComplexSystem::Matrix& a, const Eigen::VectorXcd& x,
                     const Eigen::VectorXcd& b) {
  return (b - a * x).norm();
}

std::string scientific(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", v);
  return buf;
}

}  // namespace

std::string_view to_string(SolverMethod m) {
  switch (m) {
    case SolverMethod::Auto: return "auto";
    case SolverMethod::Banded: return "banded";
    case SolverMethod::SparseLU: return "sparse_lu";
    case SolverMethod::Gmres: return "gmres";
  }
  return "unknown";
}

SolverMethod parse_solver_method(std::string_view name) {
  if (name == "auto") return SolverMethod::Auto;
  if (name == "banded") return SolverMethod::Banded;
  if (name == "sparse_lu") return SolverMethod::SparseLU;
  if (name == "gmres") return SolverMethod::Gmres;
  throw ConfigError("unknown solver method '" + std::string(name) + "'");
}

BandedLU::BandedLU(const SparseComplexSystem::Matrix& a, int kl, int ku)
    : n_(a.rows()), kl_(kl), ku_(ku), width_(2 * kl + ku + 1) {
  if (a.rows() != a.cols()) throw SolverError("banded LU needs a square matrix");
  band_.assign(static_cast<std::size_t>(n_ * width_), cplx(0.0));
  pivots_.resize(static_cast<std::size_t>(n_));
  std::vector<double> row_max(static_cast<std::size_t>(n_), 0.0);
  for (Eigen::Index r = 0; r < n_; ++r) {
    for (SparseComplexSystem::Matrix::InnerIterator it(a, r); it; ++it) {
      if (it.col() < r - kl_ || it.col() > r + ku_)
        throw SolverError("matrix entry outside the declared band");
      at(r, it.col()) = it.value();
      row_max[r] = std::max(row_max[r], std::abs(it.value()));
    }
  }

  for (Eigen::Index i = 0; i < n_; ++i) {
    const Eigen::Index last_row = std::min<Eigen::Index>(n_ - 1, i + kl_);
    const Eigen::Index last_col = std::min<Eigen::Index>(n_ - 1, i + kl_ + ku_);
    Eigen::Index p = i;
    double best = std::abs(at(i, i));
    for (Eigen::Index r = i + 1; r <= last_row; ++r) {
      if (std::abs(at(r, i)) > best) {
        best = std::abs(at(r, i));
        p = r;
      }
    }
    if (best <= kPivotThreshold * row_max[p] || best == 0.0)
      throw SolverError("banded LU: zero pivot in column " + std::to_string(i));
    pivots_[i] = p;
    if (p != i) {
      for (Eigen::Index c = i; c <= last_col; ++c) std::swap(at(i, c), at(p, c));
      std::swap(row_max[i], row_max[p]);
    }
    const cplx inv = 1.0 / at(i, i);
    for (Eigen::Index r = i + 1; r <= last_row; ++r) {
      cplx& lri = at(r, i);
      if (lri == cplx(0.0)) continue;
      lri *= inv;
      const cplx m = lri;
      cplx* dst = &at(r, i + 1);
      const cplx* src = &at(i, i + 1);
      // Row r stores column c at offset c - r + kl, row i at c - i + kl.
      for (Eigen::Index c = 0; c < last_col - i; ++c) dst[c] -= m * src[c];
    }
  }
}

Eigen::VectorXcd BandedLU::solve(const Eigen::VectorXcd& b) const {
  if (b.size() != n_) throw SolverError("right-hand side size mismatch");
  Eigen::VectorXcd x = b;
  for (Eigen::Index i = 0; i < n_; ++i) {
    if (pivots_[i] != i) std::swap(x[i], x[pivots_[i]]);
    const Eigen::Index last_row = std::min<Eigen::Index>(n_ - 1, i + kl_);
    for (Eigen::Index r = i + 1; r <= last_row; ++r) x[r] -= at(r, i) * x[i];
  }
  for (Eigen::Index i = n_ - 1; i >= 0; --i) {
    const Eigen::Index last_col = std::min<Eigen::Index>(n_ - 1, i + kl_ + ku_);
    cplx s = x[i];
    for (Eigen::Index c = i + 1; c <= last_col; ++c) s -= at(i, c) * x[c];
    x[i] = s / at(i, i);
  }
  return x;
}

Ilu0::Ilu0(const SparseComplexSystem::Matrix& a) : lu_(a) {
  lu_.makeCompressed();
  const int n = static_cast<int>(lu_.rows());
  const int* outer = lu_.outerIndexPtr();
  const int* inner = lu_.innerIndexPtr();
  cplx* val = lu_.valuePtr();
  diag_.assign(static_cast<std::size_t>(n), -1);
  for (int r = 0; r < n; ++r)
    for (int p = outer[r]; p < outer[r + 1]; ++p)
      if (inner[p] == r) diag_[r] = p;
  for (int r = 0; r < n; ++r)
    if (diag_[r] < 0) throw SolverError("ILU(0): missing diagonal in row " + std::to_string(r));

  std::vector<int> where(static_cast<std::size_t>(n), -1);
  for (int i = 0; i < n; ++i) {
    for (int p = outer[i]; p < outer[i + 1]; ++p) where[inner[p]] = p;
    for (int p = outer[i]; p < outer[i + 1] && inner[p] < i; ++p) {
      const int k = inner[p];
      const cplx pivot = val[diag_[k]];
      if (std::abs(pivot) == 0.0) throw SolverError("ILU(0): zero pivot");
      val[p] /= pivot;
      const cplx m = val[p];
      for (int q = diag_[k] + 1; q < outer[k + 1]; ++q) {
        const int w = where[inner[q]];
        if (w >= 0) val[w] -= m * val[q];
      }
    }
    for (int p = outer[i]; p < outer[i + 1]; ++p) where[inner[p]] = -1;
  }
}

Eigen::VectorXcd Ilu0::apply(const Eigen::VectorXcd& r) const {
  const int n = static_cast<int>(lu_.rows());
  const int* outer = lu_.outerIndexPtr();
  const int* inner = lu_.innerIndexPtr();
  const cplx* val = lu_.valuePtr();
  Eigen::VectorXcd y = r;
  for (int i = 0; i < n; ++i)
    for (int p = outer[i]; p < diag_[i]; ++p) y[i] -= val[p] * y[inner[p]];
  for (int i = n - 1; i >= 0; --i) {
    for (int p = diag_[i] + 1; p < outer[i + 1]; ++p) y[i] -= val[p] * y[inner[p]];
    y[i] /= val[diag_[i]];
  }
  return y;
}

Eigen::VectorXcd gmres(const SparseComplexSystem::Matrix& a, const Eigen::VectorXcd& b,
                       const Ilu0& precond, double tol, int restart, int max_iters,
                       int& iterations) {
  const Eigen::Index n = b.size();
  const double bnorm = b.norm();
  Eigen::VectorXcd x = Eigen::VectorXcd::Zero(n);
  iterations = 0;
  if (bnorm == 0.0) return x;

  Eigen::VectorXcd r = b;
  double rnorm = bnorm;
  while (true) {
    const double cycle_start = rnorm;
    const int m = restart;
    std::vector<Eigen::VectorXcd> v;
    v.reserve(static_cast<std::size_t>(m + 1));
    v.push_back(r / rnorm);
    Eigen::MatrixXcd hess = Eigen::MatrixXcd::Zero(m + 1, m);
    std::vector<cplx> cs(static_cast<std::size_t>(m)), sn(static_cast<std::size_t>(m));
    Eigen::VectorXcd g = Eigen::VectorXcd::Zero(m + 1);
    g[0] = rnorm;
    int j = 0;
    for (; j < m && iterations < max_iters; ++j, ++iterations) {
      Eigen::VectorXcd w = a * precond.apply(v[j]);
      for (int i = 0; i <= j; ++i) {
        hess(i, j) = v[i].dot(w);  // conjugates v[i]
        w -= hess(i, j) * v[i];
      }
      hess(j + 1, j) = w.norm();
      for (int i = 0; i < j; ++i) {
        const cplx t = std::conj(cs[i]) * hess(i, j) + std::conj(sn[i]) * hess(i + 1, j);
        hess(i + 1, j) = -sn[i] * hess(i, j) + cs[i] * hess(i + 1, j);
        hess(i, j) = t;
      }
      const cplx hjj = hess(j, j), hj1 = hess(j + 1, j);
      const double denom = std::sqrt(std::norm(hjj) + std::norm(hj1));
      cs[j] = denom == 0.0 ? cplx(1.0) : hjj / denom;
      sn[j] = denom == 0.0 ? cplx(0.0) : hj1 / denom;
      hess(j, j) = denom;
      hess(j + 1, j) = 0.0;
      g[j + 1] = -sn[j] * g[j];
      g[j] = std::conj(cs[j]) * g[j];
      const double est = std::abs(g[j + 1]);
      if (hj1 != cplx(0.0)) v.push_back(w / hj1);
      if (est <= tol * bnorm || hj1 == cplx(0.0)) {
        ++j;
        ++iterations;
        break;
      }
    }
    Eigen::VectorXcd y = hess.topLeftCorner(j, j).triangularView<Eigen::Upper>().solve(g.head(j));
    Eigen::VectorXcd update = Eigen::VectorXcd::Zero(n);
    for (int i = 0; i < j; ++i) update += y[i] * v[i];
    x += precond.apply(update);
    r = b - a * x;
    rnorm = r.norm();
    if (rnorm <= tol * bnorm) return x;
    if (iterations >= max_iters)
      throw SolverError("GMRES: iteration budget exhausted at relative residual " +
                        scientific(rnorm / bnorm));
    if (rnorm > 0.99 * cycle_start)
      throw SolverError("GMRES stagnated: restart cycle left the relative residual at " +
                        scientific(rnorm / bnorm));
  }
}

namespace {

/// Owns UMFPACK symbolic and numeric objects for a column-major copy.
class UmfpackFactor {
 public:
  explicit UmfpackFactor(const SparseComplexSystem::Matrix& a) : csc_(a) {
    csc_.makeCompressed();
    umfpack_zi_defaults(control_);
    const int n = static_cast<int>(csc_.rows());
    const double* ax = reinterpret_cast<const double*>(csc_.valuePtr());
    int status = umfpack_zi_symbolic(n, n, csc_.outerIndexPtr(), csc_.innerIndexPtr(), ax, nullptr,
                                     &symbolic_, control_, info_);
    if (status != UMFPACK_OK)
      throw SolverError("UMFPACK symbolic analysis failed (status " + std::to_string(status) + ")");
    status = umfpack_zi_numeric(csc_.outerIndexPtr(), csc_.innerIndexPtr(), ax, nullptr, symbolic_,
                                &numeric_, control_, info_);
    if (status == UMFPACK_ERROR_out_of_memory)
      throw SolverError("UMFPACK ran out of memory during factorization");
    if (status != UMFPACK_OK && status != UMFPACK_WARNING_singular_matrix)
      throw SolverError("UMFPACK numeric factorization failed (status " + std::to_string(status) + ")");
    if (status == UMFPACK_WARNING_singular_matrix || info_[UMFPACK_RCOND] < kPivotThreshold)
      throw SolverError("UMFPACK: matrix is singular to working precision (rcond " +
                        scientific(info_[UMFPACK_RCOND]) + ")");
  }
  UmfpackFactor(const UmfpackFactor&) = delete;
  UmfpackFactor& operator=(const UmfpackFactor&) = delete;
  ~UmfpackFactor() {
    if (numeric_) umfpack_zi_free_numeric(&numeric_);
    if (symbolic_) umfpack_zi_free_symbolic(&symbolic_);
  }

  Eigen::VectorXcd solve(const Eigen::VectorXcd& b) const {
    Eigen::VectorXcd x(b.size());
    double info[UMFPACK_INFO];
    const int status = umfpack_zi_solve(
        UMFPACK_A, csc_.outerIndexPtr(), csc_.innerIndexPtr(),
        reinterpret_cast<const double*>(csc_.valuePtr()), nullptr, reinterpret_cast<double*>(x.data()),
        nullptr, reinterpret_cast<const double*>(b.data()), nullptr, numeric_, control_, info);
    if (status != UMFPACK_OK) throw SolverError("UMFPACK solve failed (status " + std::to_string(status) + ")");
    return x;
  }

  std::size_t factor_nonzeros() const {
    return static_cast<std::size_t>(info_[UMFPACK_LNZ] + info_[UMFPACK_UNZ]);
  }

 private:
  Eigen::SparseMatrix<cplx, Eigen::ColMajor, int> csc_;
  void* symbolic_ = nullptr;
  void* numeric_ = nullptr;
  double control_[UMFPACK_CONTROL];
  double info_[UMFPACK_INFO];
};

/// x = A^{-1} b through `direct`, followed by iterative refinement while the
/// residual exceeds tol.
Eigen::VectorXcd refine(const SparseComplexSystem::Matrix& a, const Eigen::VectorXcd& b,
                        const std::function<Eigen::VectorXcd(const Eigen::VectorXcd&)>& direct,
                        int steps, double tol) {
  Eigen::VectorXcd x = direct(b);
  const double bnorm = b.norm();
  for (int s = 0; s < steps; ++s) {
    const Eigen::VectorXcd r = b - a * x;
    if (r.norm() <= 0.01 * tol * bnorm) break;
    x += direct(r);
  }
  return x;
}

}  // namespace

Eigen::VectorXcd sparse_lu_solve(const SparseComplexSystem::Matrix& a, const Eigen::VectorXcd& b,
                                 int refinement_steps, double tol, std::size_t& factor_nonzeros) {
  const UmfpackFactor lu(a);
  factor_nonzeros = lu.factor_nonzeros();
  return refine(a, b, [&](const Eigen::VectorXcd& rhs) { return lu.solve(rhs); }, refinement_steps, tol);
}

SolveReport solve(const SparseComplexSystem& sys, const SolverOptions& opt) {
  const auto start = std::chrono::steady_clock::now();
  const auto& a = sys.matrix;
  if (a.rows() != a.cols() || a.rows() != sys.rhs.size())
    throw SolverError("system is not square or the right-hand side has the wrong size");
  const double bnorm = sys.rhs.norm();
  if (bnorm == 0.0 && !opt.allow_zero_rhs)
    throw SolverError("zero right-hand side (set allow_zero_rhs to accept it)");

  SolveReport rep;
  rep.method = opt.method;
  if (rep.method == SolverMethod::Auto)
    rep.method = sys.dimension == 1 ? SolverMethod::Banded : SolverMethod::SparseLU;

  if (bnorm == 0.0) {
    rep.solution = Eigen::VectorXcd::Zero(sys.rhs.size());
  } else {
    switch (rep.method) {
      case SolverMethod::Banded: {
        const BandedLU lu(a, sys.lower_bandwidth, sys.upper_bandwidth);
        rep.factor_nonzeros = lu.stored_entries();
        rep.solution = refine(a, sys.rhs, [&](const Eigen::VectorXcd& r) { return lu.solve(r); },
                              opt.refinement_steps, opt.tol);
        break;
      }
      case SolverMethod::SparseLU:
        rep.solution = sparse_lu_solve(a, sys.rhs, opt.refinement_steps, opt.tol, rep.factor_nonzeros);
        break;
      case SolverMethod::Gmres: {
        const Ilu0 ilu(a);
        rep.solution = gmres(a, sys.rhs, ilu, opt.tol, opt.restart, opt.max_iters, rep.iterations);
        break;
      }
      case SolverMethod::Auto: break;
    }
  }
  rep.relative_residual = bnorm == 0.0 ? residual_norm(a, rep.solution, sys.rhs)
                                       : residual_norm(a, rep.solution, sys.rhs) / bnorm;
  if (!(rep.relative_residual <= opt.tol))
    throw SolverError(std::string(to_string(rep.method)) + ": relative residual " +
                      scientific(rep.relative_residual) + " above tolerance " +
                      scientific(opt.tol));
  rep.field = sys.scatter(rep.solution);
  rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return rep;
}

}  // namespace nlhelm
