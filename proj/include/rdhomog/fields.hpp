#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rdhomog/error.hpp"
#include "rdhomog/quadrature.hpp"

namespace rdh {

inline double frac(double x) noexcept {
  const double u = x - std::floor(x);
  return u >= 1.0 ? 0.0 : u;
}

/// A 1-periodic scalar coefficient with known coercivity bounds and the
/// breakpoints (in [0,1)) where it is discontinuous or non-smooth.
class PeriodicScalarField {
 public:
  static PeriodicScalarField constant(double value) {
    return piecewise_constant({0.0}, {value});
  }

  /// value[i] on [starts[i], starts[i+1]), with starts[0] == 0.
  static PeriodicScalarField piecewise_constant(std::vector<double> starts, std::vector<double> values) {
    if (starts.empty() || starts.size() != values.size())
      throw ValidationError("piecewise_constant: starts and values must be non-empty and equal length");
    if (starts.front() != 0.0) throw ValidationError("piecewise_constant: first start must be 0");
    for (std::size_t i = 1; i < starts.size(); ++i)
      if (!(starts[i] > starts[i - 1]) || starts[i] >= 1.0)
        throw ValidationError("piecewise_constant: starts must be strictly increasing in [0,1)");
    PeriodicScalarField f;
    f.kind_ = Kind::PiecewiseConstant;
    f.a_minus_ = *std::min_element(values.begin(), values.end());
    f.a_plus_ = *std::max_element(values.begin(), values.end());
    f.breaks_ = starts;
    f.starts_ = std::move(starts);
    f.values_ = std::move(values);
    f.name_ = f.values_.size() == 1 ? "constant" : "piecewise_constant";
    f.check_coercive();
    return f;
  }

  /// mean + amplitude * cos(2 pi x); smooth, no breakpoints.
  static PeriodicScalarField cosine(double mean, double amplitude) {
    PeriodicScalarField f;
    f.kind_ = Kind::Function;
    f.fn_ = [mean, amplitude](double u) { return mean + amplitude * std::cos(2.0 * std::numbers::pi * u); };
    f.a_minus_ = mean - std::abs(amplitude);
    f.a_plus_ = mean + std::abs(amplitude);
    f.name_ = "cosine";
    f.check_coercive();
    return f;
  }

  /// Arbitrary cell function; bounds are the caller's claim and are checked by
  /// verify_assumptions.
  static PeriodicScalarField custom(std::string name, std::function<double(double)> on_cell,
                                    std::vector<double> breakpoints, double a_minus, double a_plus) {
    PeriodicScalarField f;
    f.kind_ = Kind::Function;
    f.fn_ = std::move(on_cell);
    f.breaks_ = std::move(breakpoints);
    std::sort(f.breaks_.begin(), f.breaks_.end());
    f.a_minus_ = a_minus;
    f.a_plus_ = a_plus;
    f.name_ = std::move(name);
    f.check_coercive();
    return f;
  }

  /// Value for u in [0, 1).
  [[nodiscard]] double on_cell(double u) const {
    if (kind_ == Kind::PiecewiseConstant) {
      const auto it = std::upper_bound(starts_.begin(), starts_.end(), u);
      return values_[static_cast<std::size_t>(it - starts_.begin()) - 1];
    }
    return fn_(u);
  }
  [[nodiscard]] double operator()(double x) const { return on_cell(frac(x)); }

  [[nodiscard]] std::span<const double> breakpoints() const noexcept { return breaks_; }
  [[nodiscard]] double a_minus() const noexcept { return a_minus_; }
  [[nodiscard]] double a_plus() const noexcept { return a_plus_; }
  [[nodiscard]] const std::string& name() const noexcept { return name_; }
  [[nodiscard]] bool is_piecewise_constant() const noexcept { return kind_ == Kind::PiecewiseConstant; }
  [[nodiscard]] std::span<const double> piece_starts() const noexcept { return starts_; }
  [[nodiscard]] std::span<const double> piece_values() const noexcept { return values_; }

  /// Cell integral of g(u) * value(u)^power, split at breakpoints.
  template <class G>
  [[nodiscard]] double cell_integral(G&& g, int power) const {
    return quad::composite([&](double u) { return g(u) * std::pow(on_cell(u), power); }, 0.0, 1.0, breaks_);
  }

 private:
  enum class Kind { PiecewiseConstant, Function };

  void check_coercive() const {
    if (!(a_minus_ > 0.0)) throw ValidationError("scalar field '" + name_ + "' is not coercive (a_minus <= 0)");
    if (!std::isfinite(a_plus_)) throw ValidationError("scalar field '" + name_ + "' is unbounded");
  }

  Kind kind_ = Kind::PiecewiseConstant;
  std::vector<double> starts_;
  std::vector<double> values_;
  std::function<double(double)> fn_;
  std::vector<double> breaks_;
  double a_minus_ = 1.0;
  double a_plus_ = 1.0;
  std::string name_;
};

/// A Z^d-periodic d x d coefficient matrix, d in {1, 2}.
template <int Dim>
class PeriodicMatrixField {
 public:
  using Point = Eigen::Matrix<double, Dim, 1>;
  using Matrix = Eigen::Matrix<double, Dim, Dim>;

  PeriodicMatrixField(std::string name, std::function<Matrix(const Point&)> on_cell, double a_minus, double a_plus,
                      bool symmetric)
      : name_(std::move(name)), fn_(std::move(on_cell)), a_minus_(a_minus), a_plus_(a_plus), symmetric_(symmetric) {
    if (!(a_minus_ > 0.0)) throw ValidationError("matrix field '" + name_ + "' is not coercive (a_minus <= 0)");
  }

  static PeriodicMatrixField identity() {
    return PeriodicMatrixField("identity", [](const Point&) { return Matrix::Identity().eval(); }, 1.0, 1.0, true);
  }

  /// a(x_1) * Identity: layers normal to the first axis.
  static PeriodicMatrixField laminate(PeriodicScalarField a) {
    const double lo = a.a_minus();
    const double hi = a.a_plus();
    return PeriodicMatrixField(
        "laminate", [a = std::move(a)](const Point& y) { return (a.on_cell(y[0]) * Matrix::Identity()).eval(); }, lo,
        hi, true);
  }

  /// low on the two half-cells where exactly one coordinate is below 1/2,
  /// high elsewhere (2 x 2 checkerboard per unit cell).
  static PeriodicMatrixField checkerboard(double low, double high) {
    static_assert(Dim == 2, "checkerboard is two-dimensional");
    return PeriodicMatrixField(
        "checkerboard",
        [low, high](const Point& y) {
          const bool a = y[0] < 0.5;
          const bool b = y[1] < 0.5;
          return ((a != b ? low : high) * Matrix::Identity()).eval();
        },
        std::min(low, high), std::max(low, high), true);
  }

  [[nodiscard]] Matrix on_cell(const Point& u) const { return fn_(u); }
  [[nodiscard]] Matrix operator()(const Point& y) const {
    Point u;
    for (int i = 0; i < Dim; ++i) u[i] = frac(y[i]);
    return fn_(u);
  }

  [[nodiscard]] double a_minus() const noexcept { return a_minus_; }
  [[nodiscard]] double a_plus() const noexcept { return a_plus_; }
  [[nodiscard]] bool symmetric() const noexcept { return symmetric_; }
  [[nodiscard]] const std::string& name() const noexcept { return name_; }

 private:
  std::string name_;
  std::function<Matrix(const Point&)> fn_;
  double a_minus_;
  double a_plus_;
  bool symmetric_;
};

/// Right-hand side f on (0,1) with primitive F(t) = int_0^t f and double
/// primitive H(t) = int_0^t F, so that c_star = H(1).
class SourceTerm {
 public:
  static SourceTerm constant(double c) {
    SourceTerm s;
    s.name_ = "constant";
    s.f_ = [c](double) { return c; };
    s.F_ = [c](double t) { return c * t; };
    s.H_ = [c](double t) { return 0.5 * c * t * t; };
    return s;
  }

  /// f = sin(2 pi t).
  static SourceTerm sine() {
    constexpr double tau = 2.0 * std::numbers::pi;
    SourceTerm s;
    s.name_ = "sine";
    s.f_ = [](double t) { return std::sin(tau * t); };
    s.F_ = [](double t) { return (1.0 - std::cos(tau * t)) / tau; };
    s.H_ = [](double t) { return t / tau - std::sin(tau * t) / (tau * tau); };
    return s;
  }

  /// values[i] on [starts[i], starts[i+1]), starts[0] == 0.
  static SourceTerm piecewise_constant(std::vector<double> starts, std::vector<double> values) {
    if (starts.empty() || starts.size() != values.size() || starts.front() != 0.0)
      throw ValidationError("piecewise source: need starts[0] == 0 and one value per start");
    for (std::size_t i = 1; i < starts.size(); ++i)
      if (!(starts[i] > starts[i - 1]) || starts[i] >= 1.0)
        throw ValidationError("piecewise source: starts must be strictly increasing in [0,1)");
    // Primitive values at piece starts.
    std::vector<double> F0(starts.size(), 0.0);
    std::vector<double> H0(starts.size(), 0.0);
    for (std::size_t i = 1; i < starts.size(); ++i) {
      const double len = starts[i] - starts[i - 1];
      F0[i] = F0[i - 1] + values[i - 1] * len;
      H0[i] = H0[i - 1] + F0[i - 1] * len + 0.5 * values[i - 1] * len * len;
    }
    auto locate = [starts](double t) {
      const auto it = std::upper_bound(starts.begin(), starts.end(), t);
      return static_cast<std::size_t>(std::max<std::ptrdiff_t>(it - starts.begin() - 1, 0));
    };
    SourceTerm s;
    s.name_ = "piecewise_constant";
    s.f_ = [locate, values](double t) { return values[locate(t)]; };
    s.F_ = [locate, starts, values, F0](double t) {
      const auto i = locate(t);
      return F0[i] + values[i] * (t - starts[i]);
    };
    s.H_ = [locate, starts, values, F0, H0](double t) {
      const auto i = locate(t);
      const double d = t - starts[i];
      return H0[i] + F0[i] * d + 0.5 * values[i] * d * d;
    };
    s.breaks_.assign(starts.begin() + 1, starts.end());
    return s;
  }

  /// General f; primitives by composite Gauss-Legendre split at breakpoints.
  static SourceTerm numeric(std::string name, std::function<double(double)> f, std::vector<double> breakpoints) {
    SourceTerm s;
    s.name_ = std::move(name);
    s.breaks_ = std::move(breakpoints);
    std::sort(s.breaks_.begin(), s.breaks_.end());
    s.f_ = f;
    s.F_ = [f, b = s.breaks_](double t) { return quad::composite(f, 0.0, t, b); };
    s.H_ = [F = s.F_, b = s.breaks_](double t) { return quad::composite(F, 0.0, t, b); };
    return s;
  }

  [[nodiscard]] double f(double t) const { return f_(t); }
  [[nodiscard]] double F(double t) const { return F_(t); }
  /// int_0^t F.
  [[nodiscard]] double F_integral(double t) const { return H_(t); }
  [[nodiscard]] double c_star() const { return H_(1.0); }
  /// Discontinuities of f inside (0,1).
  [[nodiscard]] std::span<const double> breakpoints() const noexcept { return breaks_; }
  [[nodiscard]] const std::string& name() const noexcept { return name_; }

 private:
  std::string name_;
  std::function<double(double)> f_;
  std::function<double(double)> F_;
  std::function<double(double)> H_;
  std::vector<double> breaks_;
};

}  // namespace rdh
