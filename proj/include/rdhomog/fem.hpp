#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <array>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <ostream>
#include <string>
#include <vector>

#include "rdhomog/diffeo.hpp"
#include "rdhomog/error.hpp"
#include "rdhomog/fields.hpp"

namespace rdh {

inline constexpr double kMaxDofs = 1e7;

/// Uniform tensor mesh of the torus (0,N)^d with r elements per unit length.
/// Nodes on opposite faces are identified, so there are (N r)^d DOFs. Each
/// element carries the 2^d tensor Gauss points.
template <int Dim>
class PeriodicMesh {
  static_assert(Dim == 1 || Dim == 2, "meshes are one- or two-dimensional");

 public:
  using Point = Eigen::Matrix<double, Dim, 1>;
  static constexpr int kCorners = 1 << Dim;
  static constexpr int kQuad = 1 << Dim;

  PeriodicMesh(std::int64_t N, std::int64_t r) : N_(N), r_(r) {
    if (N < 1 || r < 1) throw ValidationError("mesh needs N >= 1 and r >= 1");
    if (std::pow(static_cast<double>(N) * static_cast<double>(r), Dim) > kMaxDofs)
      throw ValidationError("mesh with N = " + std::to_string(N) + ", r = " + std::to_string(r) +
                            " exceeds the 1e7 DOF limit");
    n_ = N * r;
    h_ = 1.0 / static_cast<double>(r);
    dofs_ = 1;
    for (int k = 0; k < Dim; ++k) dofs_ *= n_;

    const double g = 0.5 / std::sqrt(3.0);
    for (int q = 0; q < kQuad; ++q) {
      for (int k = 0; k < Dim; ++k) xi_[q][k] = (q >> k & 1) ? 0.5 + g : 0.5 - g;
      for (int c = 0; c < kCorners; ++c) {
        shape_[q][c] = 1.0;
        for (int k = 0; k < Dim; ++k) shape_[q][c] *= (c >> k & 1) ? xi_[q][k] : 1.0 - xi_[q][k];
        for (int k = 0; k < Dim; ++k) {
          double d = ((c >> k & 1) ? 1.0 : -1.0) / h_;
          for (int l = 0; l < Dim; ++l)
            if (l != k) d *= (c >> l & 1) ? xi_[q][l] : 1.0 - xi_[q][l];
          dshape_[q][c][k] = d;
        }
      }
    }
  }

  [[nodiscard]] std::int64_t N() const noexcept { return N_; }
  [[nodiscard]] std::int64_t r() const noexcept { return r_; }
  /// Elements (and nodes) per side.
  [[nodiscard]] std::int64_t side() const noexcept { return n_; }
  [[nodiscard]] double h() const noexcept { return h_; }
  [[nodiscard]] std::int64_t dofs() const noexcept { return dofs_; }
  [[nodiscard]] std::int64_t elements() const noexcept { return dofs_; }
  [[nodiscard]] double volume() const noexcept { return std::pow(static_cast<double>(N_), Dim); }
  /// Quadrature weight of each element point.
  [[nodiscard]] double weight() const noexcept { return std::pow(h_, Dim) / kQuad; }

  [[nodiscard]] std::array<std::int64_t, Dim> element_index(std::int64_t e) const noexcept {
    std::array<std::int64_t, Dim> idx{};
    for (int k = 0; k < Dim; ++k) {
      idx[k] = e % n_;
      e /= n_;
    }
    return idx;
  }

  [[nodiscard]] std::int64_t dof(std::array<std::int64_t, Dim> idx) const noexcept {
    std::int64_t d = 0;
    std::int64_t stride = 1;
    for (int k = 0; k < Dim; ++k) {
      d += (((idx[k] % n_) + n_) % n_) * stride;
      stride *= n_;
    }
    return d;
  }

  /// Global DOF of local corner c of element e (bit k of c: upper side along axis k).
  [[nodiscard]] std::int64_t corner_dof(std::int64_t e, int c) const noexcept {
    auto idx = element_index(e);
    for (int k = 0; k < Dim; ++k) idx[k] += (c >> k) & 1;
    return dof(idx);
  }

  [[nodiscard]] Point node(std::int64_t d) const noexcept {
    Point x;
    for (int k = 0; k < Dim; ++k) {
      x[k] = static_cast<double>(d % n_) * h_;
      d /= n_;
    }
    return x;
  }

  [[nodiscard]] Point quad_point(std::int64_t e, int q) const noexcept {
    const auto idx = element_index(e);
    Point y;
    for (int k = 0; k < Dim; ++k) y[k] = (static_cast<double>(idx[k]) + xi_[q][k]) * h_;
    return y;
  }

  [[nodiscard]] double shape(int q, int c) const noexcept { return shape_[q][c]; }
  [[nodiscard]] const Point& shape_grad(int q, int c) const noexcept { return dshape_[q][c]; }

 private:
  std::int64_t N_;
  std::int64_t r_;
  std::int64_t n_ = 0;
  double h_ = 1.0;
  std::int64_t dofs_ = 0;
  std::array<std::array<double, Dim>, kQuad> xi_{};
  std::array<std::array<double, kCorners>, kQuad> shape_{};
  std::array<std::array<Point, kCorners>, kQuad> dshape_{};
};

template <int Dim>
PeriodicMesh<Dim> build_mesh(std::int64_t N, std::int64_t r) {
  return PeriodicMesh<Dim>(N, r);
}

/// Everything the corrector weak form needs at the quadrature points:
/// grad phi, its inverse and determinant, and A_per, indexed e * kQuad + q.
template <int Dim>
struct CoefficientSample {
  using Matrix = Eigen::Matrix<double, Dim, Dim>;

  std::vector<Matrix> grad;
  std::vector<Matrix> inv;
  std::vector<double> det;
  std::vector<Matrix> A;

  [[nodiscard]] std::size_t size() const noexcept { return det.size(); }
  /// det(grad) inv A inv^T
  [[nodiscard]] Matrix effective(std::size_t i) const { return det[i] * inv[i] * A[i] * inv[i].transpose(); }
  /// det(grad) inv A
  [[nodiscard]] Matrix flux(std::size_t i) const { return det[i] * inv[i] * A[i]; }
};

template <int Dim>
CoefficientSample<Dim> sample_coefficients(const PeriodicMesh<Dim>& mesh, const TensorDiffeoField<Dim>& phi,
                                           const PeriodicMatrixField<Dim>& A) {
  using Matrix = typename CoefficientSample<Dim>::Matrix;
  for (int i = 0; i < Dim; ++i) {
    const auto& p = phi.axis(i);
    if (p.k_lo() > 0 || p.k_hi() < mesh.N())
      throw ValidationError("diffeomorphism is not realized over [0, N] on axis " + std::to_string(i));
  }
  const double det_floor = std::pow(phi.nu(), Dim) * (1.0 - 1e-12);
  const auto total = static_cast<std::size_t>(mesh.elements()) * PeriodicMesh<Dim>::kQuad;
  CoefficientSample<Dim> s;
  s.grad.resize(total);
  s.inv.resize(total);
  s.det.resize(total);
  s.A.resize(total);
  for (std::int64_t e = 0; e < mesh.elements(); ++e) {
    for (int q = 0; q < PeriodicMesh<Dim>::kQuad; ++q) {
      const auto i = static_cast<std::size_t>(e) * PeriodicMesh<Dim>::kQuad + static_cast<std::size_t>(q);
      const auto y = mesh.quad_point(e, q);
      const Matrix g = phi.grad(y);
      const double d = g.determinant();
      if (!(d >= det_floor)) throw ValidationError("det grad phi below nu^d at a quadrature point");
      const Matrix a = A(y);
      const Matrix sym = 0.5 * (a + a.transpose());
      Eigen::SelfAdjointEigenSolver<Matrix> es(sym, Eigen::EigenvaluesOnly);
      if (!(es.eigenvalues().minCoeff() >= A.a_minus() * (1.0 - 1e-12)))
        throw ValidationError("A_per is not coercive with bound " + std::to_string(A.a_minus()) +
                              " at a quadrature point");
      s.grad[i] = g;
      s.inv[i] = g.inverse();
      s.det[i] = d;
      s.A[i] = a;
    }
  }
  return s;
}

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

template <int Dim>
SparseMatrix assemble_stiffness(const PeriodicMesh<Dim>& mesh, const CoefficientSample<Dim>& coeff) {
  constexpr int C = PeriodicMesh<Dim>::kCorners;
  constexpr int Q = PeriodicMesh<Dim>::kQuad;
  std::vector<Eigen::Triplet<double, std::int64_t>> trip;
  trip.reserve(static_cast<std::size_t>(mesh.elements()) * C * C);
  const double w = mesh.weight();
  for (std::int64_t e = 0; e < mesh.elements(); ++e) {
    Eigen::Matrix<double, C, C> Ke = Eigen::Matrix<double, C, C>::Zero();
    for (int q = 0; q < Q; ++q) {
      const auto K = coeff.effective(static_cast<std::size_t>(e) * Q + static_cast<std::size_t>(q));
      for (int a = 0; a < C; ++a)
        for (int b = 0; b < C; ++b) Ke(a, b) += w * mesh.shape_grad(q, a).dot(K * mesh.shape_grad(q, b));
    }
    std::array<std::int64_t, C> dof{};
    for (int c = 0; c < C; ++c) dof[c] = mesh.corner_dof(e, c);
    for (int a = 0; a < C; ++a)
      for (int b = 0; b < C; ++b) trip.emplace_back(dof[a], dof[b], Ke(a, b));
  }
  SparseMatrix K(mesh.dofs(), mesh.dofs());
  K.setFromTriplets(trip.begin(), trip.end());
  return K;
}

/// Load vector -int det (grad test)^T inv A p for p = e_dir.
template <int Dim>
Eigen::VectorXd assemble_load(const PeriodicMesh<Dim>& mesh, const CoefficientSample<Dim>& coeff, int dir) {
  constexpr int C = PeriodicMesh<Dim>::kCorners;
  constexpr int Q = PeriodicMesh<Dim>::kQuad;
  Eigen::VectorXd b = Eigen::VectorXd::Zero(mesh.dofs());
  const double w = mesh.weight();
  for (std::int64_t e = 0; e < mesh.elements(); ++e) {
    for (int q = 0; q < Q; ++q) {
      const auto F = coeff.flux(static_cast<std::size_t>(e) * Q + static_cast<std::size_t>(q));
      for (int a = 0; a < C; ++a) b[mesh.corner_dof(e, a)] -= w * mesh.shape_grad(q, a).dot(F.col(dir));
    }
  }
  return b;
}

struct CgResult {
  Eigen::VectorXd x;
  double relative_residual = 0.0;
  std::int64_t iterations = 0;
  bool converged = false;
};

inline void remove_mean(Eigen::VectorXd& v) {
  if (v.size() > 0) v.array() -= v.mean();
}

/// Jacobi-preconditioned CG for a symmetric matrix that is positive definite
/// on the mean-zero subspace (its kernel is the constants). The right-hand
/// side, every preconditioned residual and the result are projected onto
/// mean-zero vectors.
inline CgResult pcg_mean_zero(const SparseMatrix& K, Eigen::VectorXd b, double tol, std::int64_t max_iter) {
  const Eigen::Index n = K.rows();
  CgResult res;
  res.x = Eigen::VectorXd::Zero(n);
  remove_mean(b);
  const double bnorm = b.norm();
  if (bnorm == 0.0) {
    res.converged = true;
    return res;
  }
  const Eigen::VectorXd inv_diag = K.diagonal().cwiseInverse();
  Eigen::VectorXd r = b;
  Eigen::VectorXd z = inv_diag.cwiseProduct(r);
  remove_mean(z);
  Eigen::VectorXd p = z;
  Eigen::VectorXd Kp(n);
  double rz = r.dot(z);
  for (std::int64_t it = 1; it <= max_iter; ++it) {
    Kp.noalias() = K * p;
    const double alpha = rz / p.dot(Kp);
    res.x.noalias() += alpha * p;
    r.noalias() -= alpha * Kp;
    res.iterations = it;
    res.relative_residual = r.norm() / bnorm;
    if (res.relative_residual <= tol) {
      res.converged = true;
      break;
    }
    z = inv_diag.cwiseProduct(r);
    remove_mean(z);
    const double rz_new = r.dot(z);
    p = z + (rz_new / rz) * p;
    rz = rz_new;
  }
  remove_mean(res.x);
  // True residual, not the recursively updated one.
  res.relative_residual = (b - K * res.x).norm() / bnorm;
  return res;
}

/// Nodal values of the mean-zero Q_N-periodic corrector in direction e_dir.
template <int Dim>
struct CorrectorSolution {
  int direction = 0;
  Eigen::VectorXd w;
  double relative_residual = 0.0;
  std::int64_t iterations = 0;
};

inline std::int64_t default_iteration_cap(std::int64_t dofs) {
  return std::max<std::int64_t>(100, static_cast<std::int64_t>(50.0 * std::sqrt(static_cast<double>(dofs))));
}

template <int Dim>
CorrectorSolution<Dim> solve_corrector(const PeriodicMesh<Dim>& mesh, const SparseMatrix& K,
                                       const CoefficientSample<Dim>& coeff, int dir, double tol = 1e-10,
                                       std::int64_t max_iter = 0) {
  if (dir < 0 || dir >= Dim) throw ValidationError("corrector direction out of range");
  if (!(tol > 0.0)) throw ValidationError("solver tolerance must be positive");
  if (max_iter <= 0) max_iter = default_iteration_cap(mesh.dofs());
  auto cg = pcg_mean_zero(K, assemble_load(mesh, coeff, dir), tol, max_iter);
  if (!cg.converged)
    throw NumericalError("corrector solve did not converge in " + std::to_string(max_iter) +
                         " iterations (relative residual " + std::to_string(cg.relative_residual) + ")");
  return {dir, std::move(cg.x), cg.relative_residual, cg.iterations};
}

template <int Dim>
CorrectorSolution<Dim> solve_corrector(const PeriodicMesh<Dim>& mesh, const CoefficientSample<Dim>& coeff, int dir,
                                       double tol = 1e-10, std::int64_t max_iter = 0) {
  return solve_corrector(mesh, assemble_stiffness(mesh, coeff), coeff, dir, tol, max_iter);
}

/// Gradient (in the reference variable y) of a nodal field at quadrature point q of element e.
template <int Dim>
Eigen::Matrix<double, Dim, 1> nodal_gradient(const PeriodicMesh<Dim>& mesh, const Eigen::VectorXd& w,
                                             std::int64_t e, int q) {
  Eigen::Matrix<double, Dim, 1> g = Eigen::Matrix<double, Dim, 1>::Zero();
  for (int c = 0; c < PeriodicMesh<Dim>::kCorners; ++c) g += w[mesh.corner_dof(e, c)] * mesh.shape_grad(q, c);
  return g;
}

/// CSV dump with columns x1, x2, w (x2 = 0 in one dimension).
template <int Dim>
void write_corrector_csv(std::ostream& os, const PeriodicMesh<Dim>& mesh, const CorrectorSolution<Dim>& sol) {
  const auto old = os.precision(17);
  os << "x1,x2,w\n";
  for (std::int64_t d = 0; d < mesh.dofs(); ++d) {
    const auto x = mesh.node(d);
    os << x[0] << ',' << (Dim > 1 ? x[Dim - 1] : 0.0) << ',' << sol.w[d] << '\n';
  }
  os.precision(old);
}

}  // namespace rdh
