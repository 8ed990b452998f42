#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <cmath>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "saa/mesh.hpp"

namespace saa {

// Symmetric positive definite matrix in compressed sparse form.
struct SparseSpd {
  Eigen::SparseMatrix<double> mat;
  bool symmetric = true;

  Eigen::Index dim() const { return mat.rows(); }

  // max|A - A^T| relative to max|A|; assembled operators stay below 1e-12.
  double symmetry_gap() const {
    Eigen::SparseMatrix<double> diff = mat - Eigen::SparseMatrix<double>(mat.transpose());
    double num = 0.0, den = 0.0;
    for (int k = 0; k < diff.outerSize(); ++k)
      for (Eigen::SparseMatrix<double>::InnerIterator it(diff, k); it; ++it)
        num = std::max(num, std::abs(it.value()));
    for (int k = 0; k < mat.outerSize(); ++k)
      for (Eigen::SparseMatrix<double>::InnerIterator it(mat, k); it; ++it)
        den = std::max(den, std::abs(it.value()));
    return den == 0.0 ? num : num / den;
  }
};

// Piecewise constant function: one value per cell.
struct P0Function {
  const Mesh2D* mesh = nullptr;
  Eigen::VectorXd values;

  static P0Function zero(const Mesh2D& m) {
    return {&m, Eigen::VectorXd::Zero(m.cell_count())};
  }
  static P0Function constant(const Mesh2D& m, double v) {
    return {&m, Eigen::VectorXd::Constant(m.cell_count(), v)};
  }
};

// Continuous piecewise linear function with zero boundary trace: one
// coefficient per interior vertex.
struct P1Function {
  const Mesh2D* mesh = nullptr;
  Eigen::VectorXd interior;

  Eigen::VectorXd full() const {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(mesh->vertex_count());
    for (int i = 0; i < mesh->interior_count(); ++i) out[mesh->interior_vertex[i]] = interior[i];
    return out;
  }
};

inline void require_same_mesh(const P0Function& a, const P0Function& b) {
  if (a.mesh != b.mesh) throw std::invalid_argument("P0Function: mesh mismatch");
}

// L^2(D) and L^1(D) norms of a P0 function; the P0 mass matrix is diagonal
// with entries h^2/2.
inline double p0_l2_norm(const P0Function& u) {
  return std::sqrt(u.mesh->cell_area() * u.values.squaredNorm());
}
inline double p0_l1_norm(const P0Function& u) {
  return u.mesh->cell_area() * u.values.lpNorm<1>();
}
inline double p0_inner(const P0Function& u, const P0Function& v) {
  require_same_mesh(u, v);
  return u.mesh->cell_area() * u.values.dot(v.values);
}

// Stiffness matrix on interior vertices for a per-cell diffusion coefficient:
// entries int_D kappa grad(phi_i) . grad(phi_j). Dirichlet rows/columns are
// eliminated, not penalized.
inline SparseSpd assemble_stiffness(const Mesh2D& mesh, const Eigen::VectorXd& kappa) {
  if (kappa.size() != mesh.cell_count())
    throw std::invalid_argument("assemble_stiffness: kappa length must equal cell count");
  if ((kappa.array() <= 0.0).any())
    throw std::invalid_argument("assemble_stiffness: kappa must be positive");
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(mesh.cell_count()) * 9);
  const double area = mesh.cell_area();
  for (int c = 0; c < mesh.cell_count(); ++c) {
    const auto tri = mesh.cells.row(c);
    Eigen::Vector2d p[3] = {mesh.vertices.row(tri[0]), mesh.vertices.row(tri[1]),
                            mesh.vertices.row(tri[2])};
    // Opposite-edge vectors; grad(phi_i) = perp(e_i) / (2A), so
    // K_ij = kappa * (e_i . e_j) / (4A).
    Eigen::Vector2d e[3] = {p[2] - p[1], p[0] - p[2], p[1] - p[0]};
    const double scale = kappa[c] / (4.0 * area);
    for (int a = 0; a < 3; ++a) {
      const int ia = mesh.interior_index[tri[a]];
      if (ia < 0) continue;
      for (int b = 0; b < 3; ++b) {
        const int ib = mesh.interior_index[tri[b]];
        if (ib < 0) continue;
        trip.emplace_back(ia, ib, scale * e[a].dot(e[b]));
      }
    }
  }
  SparseSpd A;
  A.mat.resize(mesh.interior_count(), mesh.interior_count());
  A.mat.setFromTriplets(trip.begin(), trip.end());
  return A;
}

// P1 mass matrix on all vertices (no Dirichlet elimination); the sum of all
// entries equals |D| = 1. Used for L^2 pairings and load vectors.
inline SparseSpd assemble_mass_p1(const Mesh2D& mesh) {
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(mesh.cell_count()) * 9);
  const double w = mesh.cell_area() / 12.0;
  for (int c = 0; c < mesh.cell_count(); ++c) {
    const auto tri = mesh.cells.row(c);
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) trip.emplace_back(tri[a], tri[b], (a == b ? 2.0 : 1.0) * w);
  }
  SparseSpd M;
  M.mat.resize(mesh.vertex_count(), mesh.vertex_count());
  M.mat.setFromTriplets(trip.begin(), trip.end());
  return M;
}

// P0 mass is diagonal: cell area per cell.
inline Eigen::VectorXd assemble_mass_p0(const Mesh2D& mesh) {
  return Eigen::VectorXd::Constant(mesh.cell_count(), mesh.cell_area());
}

// Control-to-load operator (P0 -> P1 right-hand side): entry (i, c) is
// int_c phi_i = h^2/6 for each vertex i of cell c. With Dirichlet
// elimination only interior rows are kept.
inline Eigen::SparseMatrix<double> assemble_control_load(const Mesh2D& mesh,
                                                         bool eliminate_dirichlet = true) {
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(mesh.cell_count()) * 3);
  const double w = mesh.cell_area() / 3.0;
  for (int c = 0; c < mesh.cell_count(); ++c) {
    const auto tri = mesh.cells.row(c);
    for (int a = 0; a < 3; ++a) {
      const int row = eliminate_dirichlet ? mesh.interior_index[tri[a]] : tri[a];
      if (row < 0) continue;
      trip.emplace_back(row, c, w);
    }
  }
  Eigen::SparseMatrix<double> B(
      eliminate_dirichlet ? mesh.interior_count() : mesh.vertex_count(), mesh.cell_count());
  B.setFromTriplets(trip.begin(), trip.end());
  return B;
}

struct SpdSolveError : std::runtime_error {
  explicit SpdSolveError(const std::string& what) : std::runtime_error(what) {}
};

struct CgOutcome {
  Eigen::VectorXd x;
  int iterations = 0;
  double residual_norm = 0.0;
};

// Plain conjugate gradients on a matrix-free SPD operator. Breakdown
// (p^T A p <= 0) reports the iteration index.
template <class Apply>
CgOutcome conjugate_gradient(const Apply& apply, const Eigen::VectorXd& b, double rel_tol,
                             int max_iter, const Eigen::VectorXd* x0 = nullptr) {
  CgOutcome out;
  out.x = x0 ? *x0 : Eigen::VectorXd::Zero(b.size());
  Eigen::VectorXd r = b - apply(out.x);
  const double target = rel_tol * b.norm();
  double rs = r.squaredNorm();
  if (std::sqrt(rs) <= target || b.norm() == 0.0) {
    if (b.norm() == 0.0) out.x.setZero();
    out.residual_norm = b.norm() == 0.0 ? 0.0 : std::sqrt(rs);
    return out;
  }
  Eigen::VectorXd p = r;
  for (int it = 0; it < max_iter; ++it) {
    Eigen::VectorXd ap = apply(p);
    const double pap = p.dot(ap);
    if (!(pap > 0.0))
      throw SpdSolveError("conjugate_gradient: breakdown (p^T A p <= 0) at iteration " +
                          std::to_string(it));
    const double alpha = rs / pap;
    out.x += alpha * p;
    r -= alpha * ap;
    const double rs_new = r.squaredNorm();
    ++out.iterations;
    if (std::sqrt(rs_new) <= target) {
      out.residual_norm = std::sqrt(rs_new);
      return out;
    }
    p = r + (rs_new / rs) * p;
    rs = rs_new;
  }
  out.residual_norm = std::sqrt(rs);
  throw SpdSolveError("conjugate_gradient: no convergence within " + std::to_string(max_iter) +
                      " iterations (residual " + std::to_string(out.residual_norm) + ")");
}

// Interior dimension above which direct factorization gives way to CG.
inline constexpr Eigen::Index kDirectSolveDimLimit = 200000;

// Reusable SPD solver: sparse Cholesky up to kDirectSolveDimLimit, conjugate
// gradients (relative tolerance 1e-12) beyond. Immutable after construction;
// safe to share across threads for repeated solves.
class SpdSolver {
 public:
  explicit SpdSolver(const SparseSpd& A) : mat_(A.mat) {
    direct_ = mat_.rows() <= kDirectSolveDimLimit;
    if (direct_) {
      llt_ = std::make_unique<Eigen::SimplicialLLT<Eigen::SparseMatrix<double>>>();
      llt_->compute(mat_);
      if (llt_->info() != Eigen::Success)
        throw SpdSolveError("SpdSolver: sparse Cholesky failed, matrix not positive definite (" +
                            locate_bad_pivot() + ")");
    }
  }

  Eigen::VectorXd solve(const Eigen::VectorXd& b) const {
    if (b.size() != mat_.rows()) throw std::invalid_argument("SpdSolver: dimension mismatch");
    if (direct_) return llt_->solve(b);
    auto apply = [&](const Eigen::VectorXd& v) -> Eigen::VectorXd { return mat_ * v; };
    return conjugate_gradient(apply, b, 1e-12, static_cast<int>(4 * mat_.rows()) + 100).x;
  }

  Eigen::Index dim() const { return mat_.rows(); }

 private:
  // For small systems a dense Cholesky scan names the first failing pivot;
  // large systems only report the failure itself.
  std::string locate_bad_pivot() const {
    if (mat_.rows() > 4096) return "dimension " + std::to_string(mat_.rows());
    Eigen::MatrixXd dense(mat_);
    const Eigen::Index n = dense.rows();
    for (Eigen::Index j = 0; j < n; ++j) {
      for (Eigen::Index i = j; i < n; ++i) {
        double s = dense(i, j);
        for (Eigen::Index k = 0; k < j; ++k) s -= dense(i, k) * dense(j, k);
        if (i == j) {
          if (!(s > 0.0)) return "pivot index " + std::to_string(j);
          dense(j, j) = std::sqrt(s);
        } else {
          dense(i, j) = s / dense(j, j);
        }
      }
    }
    return "pivot not localized";
  }

  Eigen::SparseMatrix<double> mat_;
  bool direct_ = true;
  std::unique_ptr<Eigen::SimplicialLLT<Eigen::SparseMatrix<double>>> llt_;
};

// One-shot solve with a residual guarantee: ||Ax - b||_2 <= 1e-10 (1 + ||b||_2).
inline Eigen::VectorXd solve_spd(const SparseSpd& A, const Eigen::VectorXd& b) {
  SpdSolver solver(A);
  Eigen::VectorXd x = solver.solve(b);
  const double resid = (A.mat * x - b).norm();
  if (resid > 1e-10 * (1.0 + b.norm()))
    throw SpdSolveError("solve_spd: residual " + std::to_string(resid) + " exceeds tolerance");
  return x;
}

}  // namespace saa
