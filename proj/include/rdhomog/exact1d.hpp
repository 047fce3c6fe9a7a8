#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <span>
#include <vector>

#include "rdhomog/diffeo.hpp"
#include "rdhomog/error.hpp"
#include "rdhomog/fields.hpp"
#include "rdhomog/quadrature.hpp"

namespace rdh {

/// One-dimensional homogenized quantities for a (law, a_per) pair.
struct Homog1D {
  double a_star = 0.0;
  double inv_a_star = 0.0;
  double mean_D = 1.0;   // E(int_0^1 phi')
  double var_Y0 = 0.0;   // Var(int_0^1 psi phi')
  double c_sq = 0.0;     // var_Y0 / mean_D
  double int_psi_g = 0.0;  // int_0^1 psi G_per
};

namespace detail {

/// Breakpoints of a_per and G_per merged, in [0, 1). The half cell is always
/// cut: on pieces of length <= 1/2 the 8-point rule resolves one-period
/// trigonometric content to roundoff.
inline std::vector<double> cell_cuts(const PeriodicScalarField& a, const DiffeoLaw& law) {
  std::vector<double> c(a.breakpoints().begin(), a.breakpoints().end());
  c.push_back(0.5);
  c.insert(c.end(), law.breakpoints().begin(), law.breakpoints().end());
  std::sort(c.begin(), c.end());
  c.erase(std::unique(c.begin(), c.end()), c.end());
  return c;
}

/// Cut points in s for [s0, s1]: integers, integer + cell cuts, and extras.
inline std::vector<double> s_partition(double s0, double s1, std::span<const double> unit_cuts,
                                       std::span<const double> extra) {
  std::vector<double> cuts;
  const auto k0 = static_cast<std::int64_t>(std::floor(s0));
  const auto k1 = static_cast<std::int64_t>(std::ceil(s1));
  cuts.reserve(static_cast<std::size_t>(k1 - k0 + 1) * (unit_cuts.size() + 1) + extra.size());
  for (std::int64_t k = k0; k <= k1; ++k) {
    const auto kd = static_cast<double>(k);
    cuts.push_back(kd);
    for (double c : unit_cuts) cuts.push_back(kd + c);
  }
  cuts.insert(cuts.end(), extra.begin(), extra.end());
  return quad::partition(s0, s1, cuts);
}

}  // namespace detail

/// psi(x) = 1/a_per(x) - 1/a_star.
inline double psi(const PeriodicScalarField& a, const Homog1D& h, double x) { return 1.0 / a(x) - h.inv_a_star; }

/// Var(Y_0) for the cell-amplitude family: Y_0 = int psi + X_0 int psi G_per,
/// so Var(Y_0) = Var(X_0) (int_0^1 psi G_per)^2.
inline double var_Y0(const DiffeoLaw& law, const PeriodicScalarField& a, const Homog1D& h) {
  const auto cuts = detail::cell_cuts(a, law);
  const double ipg =
      quad::composite([&](double u) { return (1.0 / a.on_cell(u) - h.inv_a_star) * law.g(u); }, 0.0, 1.0, cuts);
  return law.var_X() * ipg * ipg;
}

/// Homogenized coefficient
///   1/a_star = [int 1/a_per + E(X) int G_per/a_per] / [1 + E(X) int G_per],
/// together with E(int phi'), Var(Y_0) and c^2 = Var(Y_0)/E(int phi').
inline Homog1D a_star(const DiffeoLaw& law, const PeriodicScalarField& a) {
  const auto report = verify_assumptions(law, a);
  if (!report.pass()) {
    for (const auto& c : report.checks)
      if (!c.pass) throw ValidationError("assumption '" + c.name + "' fails: " + c.detail);
  }
  const auto cuts = detail::cell_cuts(a, law);
  const double inv_a = quad::composite([&](double u) { return 1.0 / a.on_cell(u); }, 0.0, 1.0, cuts);
  const double g_over_a = quad::composite([&](double u) { return law.g(u) / a.on_cell(u); }, 0.0, 1.0, cuts);
  Homog1D h;
  h.mean_D = law.mean_D();
  h.inv_a_star = (inv_a + law.mean_X() * g_over_a) / h.mean_D;
  h.a_star = 1.0 / h.inv_a_star;
  h.int_psi_g =
      quad::composite([&](double u) { return (1.0 / a.on_cell(u) - h.inv_a_star) * law.g(u); }, 0.0, 1.0, cuts);
  h.var_Y0 = law.var_X() * h.int_psi_g * h.int_psi_g;
  h.c_sq = h.var_Y0 / h.mean_D;
  return h;
}

/// u_star(x) = c_star x / a_star - (1/a_star) int_0^x F, c_star = int_0^1 F.
inline double solve_homogenized(const Homog1D& h, const SourceTerm& f, double x) {
  return (f.c_star() * x - f.F_integral(x)) * h.inv_a_star;
}

inline double homogenized_derivative(const Homog1D& h, const SourceTerm& f, double x) {
  return (f.c_star() - f.F(x)) * h.inv_a_star;
}

/// K_0(x, t) = (1_{[0,x]}(t) - x) (int_0^1 F - F(t)).
inline double kernel_K0(const SourceTerm& f, double x, double t) {
  return ((t <= x ? 1.0 : 0.0) - x) * (f.c_star() - f.F(t));
}

/// K_1(t) = a_star (F(t) - int_0^1 F).
inline double kernel_K1(const SourceTerm& f, const Homog1D& h, double t) { return h.a_star * (f.F(t) - f.c_star()); }

/// Corrector w(y) = a_star int_0^y psi(phi^{-1}(t)) dt, integrated in
/// s = phi^{-1}(t) as a_star int_0^{phi^{-1}(y)} psi(s) phi'(s) ds.
inline double corrector_w(const DiffeoPath& path, const Homog1D& h, const PeriodicScalarField& a, double y) {
  const double s_end = path.phi_inverse(y);
  const auto cuts = detail::cell_cuts(a, path.law());
  const double lo = std::min(0.0, s_end);
  const double hi = std::max(0.0, s_end);
  const auto pts = detail::s_partition(lo, hi, cuts, {});
  quad::KahanSum acc;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i)
    acc += quad::gauss8([&](double s) { return (1.0 / a(s) - h.inv_a_star) * path.phi_prime(s); }, pts[i], pts[i + 1]);
  return (s_end >= 0.0 ? 1.0 : -1.0) * h.a_star * acc.value();
}

/// w'(y) = a_star psi(phi^{-1}(y)).
inline double corrector_w_prime(const DiffeoPath& path, const Homog1D& h, const PeriodicScalarField& a, double y) {
  return h.a_star * psi(a, h, path.phi_inverse(y));
}

/// int_alpha^beta A(t) psi(phi^{-1}(t/eps)) dt, computed as
/// eps int A(eps phi(s)) psi(s) phi'(s) ds over s in [phi^{-1}(alpha/eps), phi^{-1}(beta/eps)].
/// weight_breaks are the discontinuities of A in t.
template <class Weight>
double weighted_psi_integral(const DiffeoPath& path, const PeriodicScalarField& a, const Homog1D& h, double eps,
                             double alpha, double beta, Weight&& weight, std::span<const double> weight_breaks = {}) {
  if (!(eps > 0.0)) throw ValidationError("eps must be positive");
  const double s0 = path.phi_inverse(alpha / eps);
  const double s1 = path.phi_inverse(beta / eps);
  std::vector<double> extra;
  for (double tb : weight_breaks)
    if (tb > alpha && tb < beta) extra.push_back(path.phi_inverse(tb / eps));
  const auto cuts = detail::cell_cuts(a, path.law());
  const auto pts = detail::s_partition(s0, s1, cuts, extra);
  quad::KahanSum acc;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    const double a_mid = a(0.5 * (pts[i] + pts[i + 1]));
    const bool constant_piece = a.is_piecewise_constant();
    acc += quad::gauss8(
        [&](double s) {
          const double av = constant_piece ? a_mid : a(s);
          return weight(eps * path.phi(s)) * (1.0 / av - h.inv_a_star) * path.phi_prime(s);
        },
        pts[i], pts[i + 1]);
  }
  return eps * acc.value();
}

/// Exact solution of -(a_per(phi^{-1}(x/eps)) u')' = f on (0,1), u(0) = u(1) = 0:
///   u(x) = c_eps int_0^x 1/a_eps - int_0^x F/a_eps,  c_eps = int_0^1 F/a_eps / int_0^1 1/a_eps,
/// with a_eps(t) = a_per(phi^{-1}(t/eps)).
///
/// All t-integrals are evaluated in s = phi^{-1}(t/eps) on pieces delimited by
/// integers, coefficient breakpoints and the images of source breakpoints.
/// Cumulative sums at piece boundaries are cached; phi^{-1} is evaluated only
/// at piece endpoints and at requested x. Holds references: path, field and
/// source must outlive the solution.
class OscillatorySolution {
 public:
  /// Cumulative integrals from 0 to x, plus local data at x.
  struct State {
    double x = 0.0;
    double s = 0.0;      // phi^{-1}(x/eps)
    double a_loc = 1.0;  // a_per(s)
    double J1 = 0.0;     // int_0^x 1/a_eps
    double JF = 0.0;     // int_0^x F/a_eps
    double P1 = 0.0;     // int_0^x psi_eps
    double PF = 0.0;     // int_0^x F psi_eps
  };

  OscillatorySolution(const DiffeoPath& path, const PeriodicScalarField& a, const SourceTerm& f, const Homog1D& h,
                      double eps)
      : path_(&path), a_(&a), f_(&f), h_(h), eps_(eps) {
    if (!(eps > 0.0)) throw ValidationError("eps must be positive, got " + std::to_string(eps));
    if (!(a.a_minus() > 0.0)) throw ValidationError("coefficient is not coercive");
    s_end_ = path.phi_inverse(1.0 / eps);
    std::vector<double> extra;
    for (double tb : f.breakpoints())
      if (tb > 0.0 && tb < 1.0) extra.push_back(path.phi_inverse(tb / eps));
    unit_cuts_ = detail::cell_cuts(a, path.law());
    cuts_ = detail::s_partition(0.0, s_end_, unit_cuts_, extra);
    const std::size_t n = cuts_.size();
    cum_.assign(n, {});
    piece_a_.resize(n - 1);
    std::array<quad::KahanSum, 4> acc;
    for (std::size_t i = 0; i + 1 < n; ++i) {
      piece_a_[i] = a(0.5 * (cuts_[i] + cuts_[i + 1]));
      const auto v = piece_integrals(i, cuts_[i], cuts_[i + 1]);
      for (std::size_t j = 0; j < 4; ++j) {
        acc[j] += v[j];
        cum_[i + 1][j] = acc[j].value();
      }
    }
    c_eps_ = cum_.back()[1] / cum_.back()[0];
    c_star_ = f.c_star();
  }

  [[nodiscard]] double eps() const noexcept { return eps_; }
  [[nodiscard]] double c_eps() const noexcept { return c_eps_; }
  [[nodiscard]] double c_star() const noexcept { return c_star_; }
  [[nodiscard]] const Homog1D& homog() const noexcept { return h_; }
  [[nodiscard]] std::size_t pieces() const noexcept { return cuts_.size() - 1; }
  [[nodiscard]] const DiffeoPath& path() const noexcept { return *path_; }
  [[nodiscard]] const PeriodicScalarField& coefficient() const noexcept { return *a_; }
  [[nodiscard]] const SourceTerm& source() const noexcept { return *f_; }

  [[nodiscard]] State state(double x) const {
    if (x <= 0.0) return state_at_s(0.0, 0, 0.0);
    if (x >= 1.0) return state_at_s(s_end_, cuts_.size() - 2, 1.0);
    const double s = std::clamp(path_->phi_inverse(x / eps_), 0.0, s_end_);
    return state_at_s(s, piece_of(s), x);
  }

  /// u_eps(x).
  [[nodiscard]] double u(double x) const {
    const auto st = state(x);
    return c_eps_ * st.J1 - st.JF;
  }
  /// du_eps/dx = (c_eps - F(x)) / a_per(phi^{-1}(x/eps)).
  [[nodiscard]] double du(double x) const {
    const auto st = state(x);
    return (c_eps_ - f_->F(x)) / st.a_loc;
  }
  /// a_per(phi^{-1}(x/eps)).
  [[nodiscard]] double coefficient_at(double x) const { return state(x).a_loc; }
  /// int_0^x psi(phi^{-1}(t/eps)) dt.
  [[nodiscard]] double psi_integral(double x) const { return state(x).P1; }

  /// Totals over (0, 1).
  [[nodiscard]] double total_J1() const noexcept { return cum_.back()[0]; }
  [[nodiscard]] double total_P1() const noexcept { return cum_.back()[2]; }
  [[nodiscard]] double total_PF() const noexcept { return cum_.back()[3]; }

  /// rho_eps = [a_star / int 1/a_eps * int psi_eps] * int (F - c_star) psi_eps.
  [[nodiscard]] double rho() const noexcept {
    return h_.a_star / total_J1() * total_P1() * (total_PF() - c_star_ * total_P1());
  }

  /// int_0^1 g(State) dx, integrated piecewise in s (dx = eps phi'(s) ds).
  /// g returns std::array<double, K>.
  template <std::size_t K, class G>
  [[nodiscard]] std::array<double, K> integrate_x(G&& g) const {
    std::array<quad::KahanSum, K> acc;
    for (std::size_t i = 0; i + 1 < cuts_.size(); ++i) {
      const double lo = cuts_[i];
      const double hi = cuts_[i + 1];
      const double half = 0.5 * (hi - lo);
      const double mid = 0.5 * (hi + lo);
      std::array<double, K> piece{};
      for (std::size_t q = 0; q < quad::kGL8Nodes.size(); ++q) {
        const double s = mid + half * quad::kGL8Nodes[q];
        const double x = eps_ * path_->phi(s);
        const auto st = state_at_s(s, i, x);
        const double w = quad::kGL8Weights[q] * half * eps_ * path_->phi_prime(s);
        const auto v = g(st);
        for (std::size_t j = 0; j < K; ++j) piece[j] += w * v[j];
      }
      for (std::size_t j = 0; j < K; ++j) acc[j] += piece[j];
    }
    std::array<double, K> out{};
    for (std::size_t j = 0; j < K; ++j) out[j] = acc[j].value();
    return out;
  }

 private:
  [[nodiscard]] std::size_t piece_of(double s) const {
    const auto it = std::upper_bound(cuts_.begin(), cuts_.end(), s);
    const auto i = static_cast<std::size_t>(std::max<std::ptrdiff_t>(it - cuts_.begin() - 1, 0));
    return std::min(i, cuts_.size() - 2);
  }

  [[nodiscard]] double a_at(double s, std::size_t piece) const {
    return a_->is_piecewise_constant() ? piece_a_[piece] : (*a_)(s);
  }

  [[nodiscard]] std::array<double, 4> piece_integrals(std::size_t piece, double lo, double hi) const {
    std::array<double, 4> v{};
    if (hi <= lo) return v;
    const double half = 0.5 * (hi - lo);
    const double mid = 0.5 * (hi + lo);
    for (std::size_t q = 0; q < quad::kGL8Nodes.size(); ++q) {
      const double s = mid + half * quad::kGL8Nodes[q];
      const double inv_a = 1.0 / a_at(s, piece);
      const double psi_v = inv_a - h_.inv_a_star;
      const double w = quad::kGL8Weights[q] * path_->phi_prime(s);
      const double Fv = f_->F(eps_ * path_->phi(s));
      v[0] += w * inv_a;
      v[1] += w * Fv * inv_a;
      v[2] += w * psi_v;
      v[3] += w * Fv * psi_v;
    }
    for (double& e : v) e *= half * eps_;
    return v;
  }

  [[nodiscard]] State state_at_s(double s, std::size_t piece, double x) const {
    State st;
    st.x = x;
    st.s = s;
    st.a_loc = a_at(s, piece);
    const auto part = piece_integrals(piece, cuts_[piece], s);
    st.J1 = cum_[piece][0] + part[0];
    st.JF = cum_[piece][1] + part[1];
    st.P1 = cum_[piece][2] + part[2];
    st.PF = cum_[piece][3] + part[3];
    return st;
  }

  const DiffeoPath* path_;
  const PeriodicScalarField* a_;
  const SourceTerm* f_;
  Homog1D h_;
  double eps_;
  double s_end_ = 0.0;
  double c_eps_ = 0.0;
  double c_star_ = 0.0;
  std::vector<double> unit_cuts_;
  std::vector<double> cuts_;
  std::vector<double> piece_a_;
  std::vector<std::array<double, 4>> cum_;
};

inline OscillatorySolution solve_oscillatory(const DiffeoPath& path, const PeriodicScalarField& a,
                                             const SourceTerm& f, const Homog1D& h, double eps) {
  return OscillatorySolution(path, a, f, h, eps);
}

/// Split of u_eps - u_star into the kernel term int_0^1 K_0(x,t) psi_eps(t) dt
/// and the remainder r_eps.
struct ResidualDecomposition {
  std::vector<double> grid;
  std::vector<double> residual;
  std::vector<double> leading;
  std::vector<double> remainder;         // residual - leading
  std::vector<double> remainder_direct;  // -(x/a_star) rho + (c_eps - c_star) int_0^x psi_eps
  double rho_eps = 0.0;
  double c_gap = 0.0;
  double max_mismatch = 0.0;
};

inline std::vector<double> uniform_grid(std::size_t points) {
  if (points < 2) throw ValidationError("grid needs at least two points");
  std::vector<double> g(points);
  for (std::size_t i = 0; i < points; ++i) g[i] = static_cast<double>(i) / static_cast<double>(points - 1);
  return g;
}

inline ResidualDecomposition residual_decompose(const OscillatorySolution& sol, std::span<const double> grid) {
  const auto& h = sol.homog();
  const auto& f = sol.source();
  const double cs = sol.c_star();
  ResidualDecomposition out;
  out.grid.assign(grid.begin(), grid.end());
  out.rho_eps = sol.rho();
  out.c_gap = sol.c_eps() - cs;
  // int_0^1 (c_star - F) psi_eps.
  const double full = cs * sol.total_P1() - sol.total_PF();
  const std::size_t n = grid.size();
  out.residual.resize(n);
  out.leading.resize(n);
  out.remainder.resize(n);
  out.remainder_direct.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = grid[i];
    if (x < 0.0 || x > 1.0) throw ValidationError("residual grid must lie in [0,1]");
    const auto st = sol.state(x);
    const double ue = sol.c_eps() * st.J1 - st.JF;
    out.residual[i] = ue - solve_homogenized(h, f, x);
    out.leading[i] = (cs * st.P1 - st.PF) - x * full;
    out.remainder[i] = out.residual[i] - out.leading[i];
    out.remainder_direct[i] = -x * h.inv_a_star * out.rho_eps + out.c_gap * st.P1;
    out.max_mismatch = std::max(out.max_mismatch, std::abs(out.remainder[i] - out.remainder_direct[i]));
  }
  return out;
}

inline ResidualDecomposition residual_decompose(const DiffeoPath& path, const PeriodicScalarField& a,
                                                const SourceTerm& f, const Homog1D& h, double eps,
                                                std::span<const double> grid) {
  return residual_decompose(OscillatorySolution(path, a, f, h, eps), grid);
}

/// ||u_eps - u_star||^2_{L2}, ||r_eps||^2_{L2} and the squared H1 norm of
/// u_eps - u_star - eps w(x/eps) u_star'(x), from the exact expressions.
struct ErrorNorms {
  double residual_l2sq = 0.0;
  double remainder_l2sq = 0.0;
  double h1_corrector_sq = 0.0;
};

inline ErrorNorms error_norms(const OscillatorySolution& sol) {
  const auto& h = sol.homog();
  const auto& f = sol.source();
  const double ce = sol.c_eps();
  const double rho = sol.rho();
  const double gap = ce - sol.c_star();
  const auto v = sol.integrate_x<4>([&](const OscillatorySolution::State& st) {
    const double x = st.x;
    const double ue = ce * st.J1 - st.JF;
    const double us = solve_homogenized(h, f, x);
    const double dus = homogenized_derivative(h, f, x);
    const double d2us = -f.f(x) * h.inv_a_star;
    const double due = (ce - f.F(x)) / st.a_loc;
    // eps w(x/eps) = a_star int_0^x psi_eps, and 1 + w'(x/eps) = a_star / a_loc.
    const double eps_w = h.a_star * st.P1;
    const double one_plus_wp = h.a_star / st.a_loc;
    const double e = ue - us - eps_w * dus;
    const double de = due - dus * one_plus_wp - eps_w * d2us;
    const double r = -x * h.inv_a_star * rho + gap * st.P1;
    return std::array<double, 4>{(ue - us) * (ue - us), r * r, e * e, de * de};
  });
  return {v[0], v[1], v[2] + v[3]};
}

inline double h1_corrector_error(const DiffeoPath& path, const PeriodicScalarField& a, const SourceTerm& f,
                                 const Homog1D& h, double eps) {
  return error_norms(OscillatorySolution(path, a, f, h, eps)).h1_corrector_sq;
}

}  // namespace rdh
