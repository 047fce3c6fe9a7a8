#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "rdhomog/diffeo.hpp"
#include "rdhomog/exact1d.hpp"
#include "rdhomog/fem.hpp"
#include "rdhomog/fields.hpp"
#include "rdhomog/parallel.hpp"
#include "rdhomog/quadrature.hpp"
#include "rdhomog/seeding.hpp"
#include "rdhomog/stats.hpp"

namespace rdh {

template <int Dim>
using MatrixD = Eigen::Matrix<double, Dim, Dim>;

template <int Dim>
struct HomogenizedEstimate {
  std::int64_t N = 0;
  std::uint64_t seed = 0;
  MatrixD<Dim> alpha = MatrixD<Dim>::Identity();
  MatrixD<Dim> beta = MatrixD<Dim>::Identity();
  MatrixD<Dim> B_star = MatrixD<Dim>::Identity();
  MatrixD<Dim> A_star = MatrixD<Dim>::Identity();
  double max_solver_residual = 0.0;
  std::int64_t iterations = 0;
};

/// alpha_N = |Q_N|^-1 int grad phi from the exact cell sums, and
/// beta_N = |Q_N|^-1 int det(grad phi) (grad phi)^-1 by quadrature of the
/// per-axis derivatives.
template <int Dim>
std::pair<MatrixD<Dim>, MatrixD<Dim>> alpha_beta(const TensorDiffeoField<Dim>& phi, std::int64_t N) {
  if (N < 1) throw ValidationError("alpha_beta needs N >= 1");
  const auto Nd = static_cast<double>(N);
  MatrixD<Dim> alpha = MatrixD<Dim>::Zero();
  std::array<double, Dim> mean_prime{};
  for (int i = 0; i < Dim; ++i) {
    const auto& p = phi.axis(i);
    alpha(i, i) = (p.phi_at_integer(N) - p.phi_at_integer(0)) / Nd;
    std::vector<double> cuts(p.law().breakpoints().begin(), p.law().breakpoints().end());
    cuts.push_back(0.5);
    // phi' - 1 so that the identity map gives exactly 1
    mean_prime[static_cast<std::size_t>(i)] =
        1.0 + quad::composite_periodic([&p](double y) { return p.phi_prime(y) - 1.0; }, 0.0, Nd, cuts) / Nd;
  }
  MatrixD<Dim> beta = MatrixD<Dim>::Zero();
  for (int i = 0; i < Dim; ++i) {
    double prod = 1.0;
    for (int k = 0; k < Dim; ++k)
      if (k != i) prod *= mean_prime[static_cast<std::size_t>(k)];
    beta(i, i) = prod;
  }
  return {alpha, beta};
}

/// Adjugate of a 1x1 or 2x2 matrix.
template <int Dim>
MatrixD<Dim> adjugate(const MatrixD<Dim>& m) {
  if constexpr (Dim == 1) {
    return MatrixD<Dim>::Identity();
  } else {
    MatrixD<Dim> a;
    a << m(1, 1), -m(0, 1), -m(1, 0), m(0, 0);
    return a;
  }
}

/// Solves the d corrector problems on Q_N and forms
/// B*_ij = |Q_N|^-1 int det e_i^T A (e_j + inv^T grad w_j),  A* = B* / det(alpha).
template <int Dim>
HomogenizedEstimate<Dim> estimate_A_star(const PeriodicMesh<Dim>& mesh, const TensorDiffeoField<Dim>& phi,
                                         const PeriodicMatrixField<Dim>& A_per, double tol = 1e-10) {
  constexpr int Q = PeriodicMesh<Dim>::kQuad;
  const auto coeff = sample_coefficients(mesh, phi, A_per);
  const auto K = assemble_stiffness(mesh, coeff);
  HomogenizedEstimate<Dim> est;
  est.N = mesh.N();
  est.seed = phi.axis(0).seed();
  const double w = mesh.weight() / mesh.volume();
  for (int j = 0; j < Dim; ++j) {
    const auto sol = solve_corrector(mesh, K, coeff, j, tol);
    est.max_solver_residual = std::max(est.max_solver_residual, sol.relative_residual);
    est.iterations += sol.iterations;
    quad::KahanSum acc[Dim];
    for (std::int64_t e = 0; e < mesh.elements(); ++e) {
      for (int q = 0; q < Q; ++q) {
        const auto i = static_cast<std::size_t>(e) * Q + static_cast<std::size_t>(q);
        Eigen::Matrix<double, Dim, 1> v = Eigen::Matrix<double, Dim, 1>::Unit(j);
        v += coeff.inv[i].transpose() * nodal_gradient(mesh, sol.w, e, q);
        const Eigen::Matrix<double, Dim, 1> flux = coeff.det[i] * (coeff.A[i] * v);
        for (int k = 0; k < Dim; ++k) acc[k] += w * flux[k];
      }
    }
    for (int k = 0; k < Dim; ++k) est.B_star(k, j) = acc[k].value();
  }
  std::tie(est.alpha, est.beta) = alpha_beta(phi, mesh.N());
  const double det_alpha = est.alpha.determinant();
  if (!(det_alpha > 0.0)) throw NumericalError("singular alpha_N");
  est.A_star = est.B_star / det_alpha;
  return est;
}

/// One row per N: entrywise mean and sample standard deviation of A*_N over M
/// realizations, and the max-entry change of the mean from the previous row.
template <int Dim>
struct ConvergenceRow {
  std::int64_t N = 0;
  std::size_t M = 0;
  MatrixD<Dim> mean = MatrixD<Dim>::Zero();
  MatrixD<Dim> std = MatrixD<Dim>::Zero();
  double cauchy_diff = std::numeric_limits<double>::quiet_NaN();
  std::vector<HomogenizedEstimate<Dim>> estimates;
};

template <int Dim>
struct ConvergenceTable {
  std::vector<ConvergenceRow<Dim>> rows;
};

struct StudyOptions {
  std::int64_t r = 8;
  double tol = 1e-10;
  std::size_t workers = 1;
};

/// Realization i at size N uses seed study_seed(base, N, i), so every
/// estimate is reproducible in isolation.
template <int Dim>
ConvergenceTable<Dim> convergence_study(const DiffeoLaw& law, const PeriodicMatrixField<Dim>& A_per,
                                        const std::vector<std::int64_t>& Ns, std::size_t M, std::uint64_t base_seed,
                                        const StudyOptions& opt = {}) {
  if (Ns.empty()) throw ValidationError("convergence study needs at least one N");
  for (std::size_t i = 0; i < Ns.size(); ++i) {
    if (Ns[i] < 1) throw ValidationError("N values must be >= 1");
    if (i > 0 && Ns[i] <= Ns[i - 1]) throw ValidationError("N list must be strictly increasing");
  }
  if (M < 2) throw ValidationError("convergence study needs M >= 2 realizations per N");
  ConvergenceTable<Dim> table;
  for (const auto N : Ns) {
    const PeriodicMesh<Dim> mesh(N, opt.r);
    ConvergenceRow<Dim> row;
    row.N = N;
    row.M = M;
    row.estimates.resize(M);
    try {
      parallel_for(M, opt.workers, [&](std::size_t i) {
        const auto seed = seeding::study_seed(base_seed, N, static_cast<std::int64_t>(i));
        const TensorDiffeoField<Dim> phi(law, seed, N);
        row.estimates[i] = estimate_A_star(mesh, phi, A_per, opt.tol);
        row.estimates[i].seed = seed;
      });
    } catch (const std::runtime_error& e) {
      throw NumericalError("N = " + std::to_string(N) + ", " + e.what());
    }
    for (int a = 0; a < Dim; ++a) {
      for (int b = 0; b < Dim; ++b) {
        std::vector<double> v(M);
        for (std::size_t i = 0; i < M; ++i) v[i] = row.estimates[i].A_star(a, b);
        row.mean(a, b) = stats::mean(v);
        row.std(a, b) = std::sqrt(stats::variance(v));
      }
    }
    if (!table.rows.empty()) row.cauchy_diff = (row.mean - table.rows.back().mean).cwiseAbs().maxCoeff();
    table.rows.push_back(std::move(row));
  }
  return table;
}

struct CrossValidation {
  std::int64_t N = 0;
  std::int64_t r = 0;
  std::size_t M = 0;
  double fem_mean = 0.0;
  double fem_se = 0.0;
  double exact = 0.0;
  double relative_gap = 0.0;
};

/// One-dimensional FEM estimate of A*_N (mean over M realizations at size N)
/// against the exact homogenized coefficient.
inline CrossValidation cross_validate_1d(const DiffeoLaw& law, const PeriodicScalarField& a_per, std::int64_t N,
                                         std::size_t M = 64, std::uint64_t seed = 0, const StudyOptions& opt = {}) {
  const auto table = convergence_study<1>(law, PeriodicMatrixField<1>::laminate(a_per), {N}, M, seed, opt);
  std::vector<double> v;
  for (const auto& e : table.rows.front().estimates) v.push_back(e.A_star(0, 0));
  CrossValidation cv;
  cv.N = N;
  cv.r = opt.r;
  cv.M = M;
  cv.fem_mean = stats::mean(v);
  cv.fem_se = std::sqrt(stats::variance(v) / static_cast<double>(M));
  cv.exact = a_star(law, a_per).a_star;
  cv.relative_gap = std::abs(cv.fem_mean - cv.exact) / cv.exact;
  return cv;
}

}  // namespace rdh
