#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rdhomog/error.hpp"
#include "rdhomog/fields.hpp"
#include "rdhomog/seeding.hpp"

namespace rdh {

/// Distribution of the per-cell amplitude X_k on [-m, m].
enum class XDist {
  UniformCentered,  // Uniform(-m, m)
  UniformPositive,  // Uniform(0, m)
  TwoPoint,         // {-m, +m} with probability 1/2 each
};

/// Shape G_per of the cell perturbation, sup-norm m.
enum class GShape {
  Sine,  // m sin(2 pi y)
  Haar,  // m on [0, 1/2), -m on [1/2, 1)
};

inline std::string to_string(XDist d) {
  switch (d) {
    case XDist::UniformCentered: return "uniform";
    case XDist::UniformPositive: return "uniform_positive";
    case XDist::TwoPoint: return "two_point";
  }
  return "?";
}

inline std::string to_string(GShape g) { return g == GShape::Sine ? "sine" : "haar"; }

/// Law of a random diffeomorphism with derivative
///   phi'(y) = 1 + X_{floor(y)} G_per(y),   X_k i.i.d., |X_k| <= m, |G_per| <= m,
/// so that nu = 1 - m^2 <= phi' <= 1 + m^2 = M_bound. m = 0 is the identity law.
class DiffeoLaw {
 public:
  DiffeoLaw(double m, XDist x_dist = XDist::UniformCentered, GShape g = GShape::Sine)
      : m_(m), x_dist_(x_dist), g_(g) {
    if (!(m >= 0.0 && m < 1.0))
      throw ValidationError("diffeomorphism amplitude m = " + std::to_string(m) +
                            " violates 0 <= m < 1 (needed for nu = 1 - m^2 > 0)");
    switch (x_dist_) {
      case XDist::UniformCentered:
        mean_x_ = 0.0;
        var_x_ = m * m / 3.0;
        break;
      case XDist::UniformPositive:
        mean_x_ = 0.5 * m;
        var_x_ = m * m / 12.0;
        break;
      case XDist::TwoPoint:
        mean_x_ = 0.0;
        var_x_ = m * m;
        break;
    }
    if (g_ == GShape::Haar) breaks_ = {0.5};
  }

  static DiffeoLaw identity() { return DiffeoLaw(0.0); }

  [[nodiscard]] double m() const noexcept { return m_; }
  [[nodiscard]] XDist x_dist() const noexcept { return x_dist_; }
  [[nodiscard]] GShape g_shape() const noexcept { return g_; }
  [[nodiscard]] double nu() const noexcept { return 1.0 - m_ * m_; }
  [[nodiscard]] double M_bound() const noexcept { return 1.0 + m_ * m_; }
  [[nodiscard]] double mean_X() const noexcept { return mean_x_; }
  [[nodiscard]] double var_X() const noexcept { return var_x_; }
  /// E(int_0^1 phi') = 1 + E(X_0) int_0^1 G_per.
  [[nodiscard]] double mean_D() const noexcept { return 1.0 + mean_x_ * g_primitive(1.0); }
  [[nodiscard]] bool deterministic() const noexcept { return m_ == 0.0 || var_x_ == 0.0; }

  /// Breakpoints of G_per in [0, 1).
  [[nodiscard]] std::span<const double> breakpoints() const noexcept { return breaks_; }

  /// X drawn from a 64-bit key; pure function of the key.
  [[nodiscard]] double draw_X(std::uint64_t key) const noexcept {
    if (m_ == 0.0) return 0.0;
    const double u = seeding::to_unit(key);
    switch (x_dist_) {
      case XDist::UniformCentered: return m_ * (2.0 * u - 1.0);
      case XDist::UniformPositive: return m_ * u;
      case XDist::TwoPoint: return (key >> 63) ? m_ : -m_;
    }
    return 0.0;
  }

  /// G_per(u) for u in [0, 1).
  [[nodiscard]] double g(double u) const noexcept {
    if (g_ == GShape::Sine) return m_ * std::sin(2.0 * std::numbers::pi * u);
    return u < 0.5 ? m_ : -m_;
  }

  /// int_0^u G_per for u in [0, 1].
  [[nodiscard]] double g_primitive(double u) const noexcept {
    if (g_ == GShape::Sine) return m_ * (1.0 - std::cos(2.0 * std::numbers::pi * u)) / (2.0 * std::numbers::pi);
    return u < 0.5 ? m_ * u : m_ * (1.0 - u);
  }

 private:
  double m_;
  XDist x_dist_;
  GShape g_;
  double mean_x_ = 0.0;
  double var_x_ = 0.0;
  std::vector<double> breaks_;
};

/// One realization of the random diffeomorphism, anchored at phi(0) = 0.
///
/// X_k is a pure function of (seed, k). Cells in [k_lo, k_hi) are cached
/// together with phi at the integers; evaluations outside the cached range
/// are still exact (the missing cell sums are computed on the fly) but slower.
/// Const members are safe to call concurrently; extend() is not and must be
/// done before the path is shared.
class DiffeoPath {
 public:
  DiffeoPath(DiffeoLaw law, std::uint64_t seed, std::int64_t k_lo = 0, std::int64_t k_hi = 1)
      : law_(std::move(law)), seed_(seed), k_lo_(0), k_hi_(0), phi_int_{0.0} {
    if (k_hi <= k_lo) throw ValidationError("cell range must be nonempty");
    extend(k_lo, k_hi);
  }

  /// Path with prescribed X_k = values[k - first] on [first, first + n);
  /// cells outside that range fall back to seeded draws.
  static DiffeoPath with_cells(const DiffeoLaw& law, std::int64_t first, const std::vector<double>& values,
                               std::uint64_t seed = 0) {
    if (values.empty()) throw ValidationError("with_cells: no cell values");
    for (double v : values)
      if (std::abs(v) > law.m()) throw ValidationError("with_cells: |X_k| exceeds m");
    DiffeoPath p(law, seed, 0, 1);
    const auto last = first + static_cast<std::int64_t>(values.size());
    const std::int64_t lo = std::min<std::int64_t>(first, 0);
    const std::int64_t hi = std::max<std::int64_t>(last, 1);
    p.x_.assign(static_cast<std::size_t>(hi - lo), 0.0);
    for (std::int64_t k = lo; k < hi; ++k) {
      const auto i = static_cast<std::size_t>(k - lo);
      p.x_[i] = (k >= first && k < last) ? values[static_cast<std::size_t>(k - first)]
                                          : law.draw_X(seeding::cell_key(seed, k));
    }
    p.k_lo_ = lo;
    p.k_hi_ = hi;
    p.rebuild_phi();
    return p;
  }

  [[nodiscard]] const DiffeoLaw& law() const noexcept { return law_; }
  [[nodiscard]] std::uint64_t seed() const noexcept { return seed_; }
  [[nodiscard]] std::int64_t k_lo() const noexcept { return k_lo_; }
  [[nodiscard]] std::int64_t k_hi() const noexcept { return k_hi_; }

  [[nodiscard]] double X(std::int64_t k) const noexcept {
    if (k >= k_lo_ && k < k_hi_) return x_[static_cast<std::size_t>(k - k_lo_)];
    return law_.draw_X(seeding::cell_key(seed_, k));
  }

  /// D_k = phi(k+1) - phi(k).
  [[nodiscard]] double D(std::int64_t k) const noexcept { return 1.0 + X(k) * law_.g_primitive(1.0); }

  [[nodiscard]] double phi_at_integer(std::int64_t k) const noexcept {
    if (k >= k_lo_ && k <= k_hi_) return phi_int_[static_cast<std::size_t>(k - k_lo_)];
    double acc = 0.0;
    if (k > k_hi_) {
      acc = phi_int_.back();
      for (std::int64_t j = k_hi_; j < k; ++j) acc += D(j);
    } else {
      acc = phi_int_.front();
      for (std::int64_t j = k_lo_ - 1; j >= k; --j) acc -= D(j);
    }
    return acc;
  }

  [[nodiscard]] double phi(double y) const noexcept {
    const double fk = std::floor(y);
    const auto k = static_cast<std::int64_t>(fk);
    const double u = y - fk;
    return phi_at_integer(k) + u + X(k) * law_.g_primitive(u);
  }

  [[nodiscard]] double phi_prime(double y) const noexcept {
    const double fk = std::floor(y);
    return 1.0 + X(static_cast<std::int64_t>(fk)) * law_.g(y - fk);
  }

  /// Index k with phi(k) <= z < phi(k+1).
  [[nodiscard]] std::int64_t cell_of_value(double z) const {
    if (z >= phi_int_.front() && z < phi_int_.back()) {
      const auto it = std::upper_bound(phi_int_.begin(), phi_int_.end(), z);
      return k_lo_ + static_cast<std::int64_t>(it - phi_int_.begin()) - 1;
    }
    std::int64_t k;
    double at;
    if (z >= phi_int_.back()) {
      k = k_hi_;
      at = phi_int_.back();
      while (true) {
        const double next = at + D(k);
        if (z < next) return k;
        at = next;
        ++k;
      }
    }
    k = k_lo_;
    at = phi_int_.front();
    while (z < at) {
      --k;
      at -= D(k);
    }
    return k;
  }

  /// y with |phi(y) - z| <= tol * max(1, |z|): bisection down to a bracket of
  /// width 1e-3 inside the cell, then Newton safeguarded by the bracket.
  [[nodiscard]] double phi_inverse(double z, double tol = 1e-12) const {
    if (!(tol > 0.0)) throw ValidationError("phi_inverse: tol must be positive");
    const std::int64_t k = cell_of_value(z);
    const double base = phi_at_integer(k);
    const double target = z - base;
    const double xk = X(k);
    const auto kd = static_cast<double>(k);
    if (xk == 0.0 || target == 0.0) return kd + target;

    auto residual = [&](double u) { return u + xk * law_.g_primitive(u) - target; };
    double lo = 0.0;
    double hi = 1.0;
    if (residual(lo) > 0.0 || residual(hi) < 0.0)
      throw NumericalError("phi_inverse: failed to bracket z = " + std::to_string(z));
    while (hi - lo > 1e-3) {
      const double mid = 0.5 * (lo + hi);
      (residual(mid) > 0.0 ? hi : lo) = mid;
    }
    double u = 0.5 * (lo + hi);
    for (int it = 0; it < 50; ++it) {
      const double r = residual(u);
      if (r == 0.0) break;
      (r > 0.0 ? hi : lo) = u;
      double next = u - r / (1.0 + xk * law_.g(u));
      if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
      if (std::abs(next - u) <= 1e-16) {
        u = next;
        break;
      }
      u = next;
    }
    if (std::abs(residual(u)) > tol * std::max(1.0, std::abs(z)))
      throw NumericalError("phi_inverse: Newton did not reach tolerance at z = " + std::to_string(z));
    return kd + u;
  }

  /// Realize (cache) cells so that [k_lo, k_hi) and cell 0 are covered. Never changes
  /// values already realized.
  void extend(std::int64_t k_lo, std::int64_t k_hi) {
    const std::int64_t new_lo = std::min(k_lo, k_lo_);
    const std::int64_t new_hi = std::max(k_hi, k_hi_);
    if (new_lo == k_lo_ && new_hi == k_hi_ && !x_.empty()) return;
    std::vector<double> xs(static_cast<std::size_t>(new_hi - new_lo));
    for (std::int64_t k = new_lo; k < new_hi; ++k)
      xs[static_cast<std::size_t>(k - new_lo)] =
          (k >= k_lo_ && k < k_hi_ && !x_.empty()) ? x_[static_cast<std::size_t>(k - k_lo_)]
                                                   : law_.draw_X(seeding::cell_key(seed_, k));
    x_ = std::move(xs);
    k_lo_ = new_lo;
    k_hi_ = new_hi;
    rebuild_phi();
  }

  /// Realize enough cells that phi^{-1}([z_lo, z_hi]) lies in the cached range.
  void extend_to_cover(double z_lo, double z_hi) {
    const std::int64_t hi = cell_of_value(z_hi) + 1;
    const std::int64_t lo = cell_of_value(z_lo);
    extend(lo, hi);
  }

 private:
  // phi at the integers of the cached range; the range always contains 0,
  // where phi is anchored to 0.
  void rebuild_phi() {
    const double g1 = law_.g_primitive(1.0);
    phi_int_.assign(x_.size() + 1, 0.0);
    const auto zero = static_cast<std::size_t>(-k_lo_);
    for (std::size_t i = zero; i < x_.size(); ++i) phi_int_[i + 1] = phi_int_[i] + 1.0 + x_[i] * g1;
    for (std::size_t i = zero; i-- > 0;) phi_int_[i] = phi_int_[i + 1] - (1.0 + x_[i] * g1);
  }

  DiffeoLaw law_;
  std::uint64_t seed_;
  std::int64_t k_lo_;
  std::int64_t k_hi_;
  std::vector<double> x_;
  std::vector<double> phi_int_;  // phi(k_lo), ..., phi(k_hi)
};

/// Realize the cells [first, last) of a path with the given seed.
inline DiffeoPath sample_path(const DiffeoLaw& law, std::int64_t first, std::int64_t last, std::uint64_t seed) {
  return DiffeoPath(law, seed, first, last);
}

/// Tensorized d-dimensional diffeomorphism phi(x)_i = phi_i(x_i), one
/// independent path per axis.
template <int Dim>
class TensorDiffeoField {
 public:
  using Point = Eigen::Matrix<double, Dim, 1>;
  using Matrix = Eigen::Matrix<double, Dim, Dim>;

  TensorDiffeoField(const DiffeoLaw& law, std::uint64_t seed, std::int64_t cells)
      : TensorDiffeoField(make_paths(law, seed, cells)) {}

  explicit TensorDiffeoField(std::array<DiffeoPath, Dim> paths) : paths_(std::move(paths)) {}

  [[nodiscard]] const DiffeoPath& axis(int i) const { return paths_[static_cast<std::size_t>(i)]; }
  [[nodiscard]] const std::array<DiffeoPath, Dim>& paths() const noexcept { return paths_; }

  [[nodiscard]] Matrix grad(const Point& y) const {
    Matrix g = Matrix::Zero();
    for (int i = 0; i < Dim; ++i) g(i, i) = paths_[static_cast<std::size_t>(i)].phi_prime(y[i]);
    return g;
  }
  [[nodiscard]] Point map(const Point& y) const {
    Point z;
    for (int i = 0; i < Dim; ++i) z[i] = paths_[static_cast<std::size_t>(i)].phi(y[i]);
    return z;
  }
  [[nodiscard]] double nu() const noexcept {
    double lo = 1.0;
    for (const auto& p : paths_) lo = std::min(lo, p.law().nu());
    return lo;
  }

 private:
  static std::array<DiffeoPath, Dim> make_paths(const DiffeoLaw& law, std::uint64_t seed, std::int64_t cells) {
    if (cells < 1) throw ValidationError("tensor diffeomorphism needs at least one cell per axis");
    return [&]<std::size_t... I>(std::index_sequence<I...>) {
      return std::array<DiffeoPath, Dim>{DiffeoPath(law, seeding::axis_seed(seed, static_cast<int>(I)), 0, cells)...};
    }(std::make_index_sequence<Dim>{});
  }

  std::array<DiffeoPath, Dim> paths_;
};

struct AssumptionCheck {
  std::string name;
  bool pass = false;
  std::string detail;
};

struct AssumptionReport {
  double nu = 0.0;
  double M_bound = 0.0;
  double a_minus = 0.0;
  double a_plus = 0.0;
  std::vector<AssumptionCheck> checks;

  [[nodiscard]] bool pass() const {
    return std::all_of(checks.begin(), checks.end(), [](const AssumptionCheck& c) { return c.pass; });
  }
};

namespace detail {

inline void add_law_checks(const DiffeoLaw& law, AssumptionReport& rep) {
  rep.nu = law.nu();
  rep.M_bound = law.M_bound();
  rep.checks.push_back({"nu_positive", law.nu() > 0.0, "nu = 1 - m^2 = " + std::to_string(law.nu())});
  rep.checks.push_back({"M_finite", std::isfinite(law.M_bound()), "M = 1 + m^2 = " + std::to_string(law.M_bound())});
  // Sampled check of the pointwise derivative bounds.
  bool ok = true;
  for (int i = 0; i < 4096 && ok; ++i) {
    const double u = seeding::to_unit(seeding::mix(0x5eed, 1, i));
    for (double x : {-law.m(), law.m(), law.draw_X(seeding::mix(0x5eed, 2, i))}) {
      const double d = 1.0 + x * law.g(u);
      ok = ok && d >= law.nu() - 1e-15 && d <= law.M_bound() + 1e-15;
    }
  }
  rep.checks.push_back({"phi_prime_bounds", ok, "nu <= phi' <= M at 4096 sampled points"});
}

}  // namespace detail

/// Checks the coercivity/boundedness of a_per and the derivative bounds of
/// the law; failures are reported, never thrown.
inline AssumptionReport verify_assumptions(const DiffeoLaw& law, const PeriodicScalarField& a) {
  AssumptionReport rep;
  detail::add_law_checks(law, rep);
  rep.a_minus = a.a_minus();
  rep.a_plus = a.a_plus();
  rep.checks.push_back({"a_minus_positive", a.a_minus() > 0.0, "a_minus = " + std::to_string(a.a_minus())});
  bool within = true;
  bool periodic = true;
  for (int i = 0; i < 4096; ++i) {
    const double x = 8.0 * seeding::to_unit(seeding::mix(0xa9e7, 0, i)) - 4.0;
    const double v = a(x);
    within = within && v >= a.a_minus() && v <= a.a_plus();
    periodic = periodic && v == a(x + 1.0);
  }
  rep.checks.push_back({"a_bounds", within, "a_minus <= a_per <= a_plus at 4096 sampled points"});
  rep.checks.push_back({"a_periodic", periodic, "a_per(x + 1) == a_per(x) at 4096 sampled points"});
  const auto b = a.breakpoints();
  const bool sorted = std::adjacent_find(b.begin(), b.end(), std::greater_equal<>()) == b.end() &&
                      std::all_of(b.begin(), b.end(), [](double v) { return v >= 0.0 && v < 1.0; });
  rep.checks.push_back({"breakpoints_sorted", sorted, "breakpoints strictly increasing in [0,1)"});
  return rep;
}

template <int Dim>
AssumptionReport verify_assumptions(const DiffeoLaw& law, const PeriodicMatrixField<Dim>& A) {
  using Point = typename PeriodicMatrixField<Dim>::Point;
  AssumptionReport rep;
  detail::add_law_checks(law, rep);
  rep.a_minus = A.a_minus();
  rep.a_plus = A.a_plus();
  rep.checks.push_back({"a_minus_positive", A.a_minus() > 0.0, "a_minus = " + std::to_string(A.a_minus())});
  bool coercive = true;
  bool bounded = true;
  for (int i = 0; i < 4096; ++i) {
    Point y, xi;
    for (int j = 0; j < Dim; ++j) {
      y[j] = seeding::to_unit(seeding::mix(0xc0e7, j, i));
      xi[j] = 2.0 * seeding::to_unit(seeding::mix(0xc0e8, j, i)) - 1.0;
    }
    const auto M = A.on_cell(y);
    coercive = coercive && xi.dot(M * xi) >= A.a_minus() * xi.squaredNorm() * (1.0 - 1e-14);
    bounded = bounded && M.cwiseAbs().maxCoeff() <= A.a_plus();
  }
  rep.checks.push_back({"coercive", coercive, "xi^T A xi >= a_minus |xi|^2 at 4096 sampled (y, xi)"});
  rep.checks.push_back({"bounded", bounded, "|A_ij| <= a_plus at 4096 sampled points"});
  return rep;
}

}  // namespace rdh
