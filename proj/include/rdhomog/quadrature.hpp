#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <span>
#include <vector>

namespace rdh::quad {

/// 8-point Gauss-Legendre rule on [-1, 1]; exact for polynomials of degree 15.
inline constexpr std::array<double, 8> kGL8Nodes = {
    -0.9602898564975362, -0.7966664774136267, -0.525532409916329, -0.18343464249564978,
    0.18343464249564978, 0.525532409916329,   0.7966664774136267, 0.9602898564975362};
inline constexpr std::array<double, 8> kGL8Weights = {
    0.10122853629037669, 0.22238103445337434, 0.31370664587788705, 0.36268378337836177,
    0.36268378337836177, 0.31370664587788705, 0.22238103445337434, 0.10122853629037669};

template <class F>
double gauss8(F&& f, double a, double b) {
  const double half = 0.5 * (b - a);
  const double mid = 0.5 * (a + b);
  double acc = 0.0;
  for (std::size_t q = 0; q < kGL8Nodes.size(); ++q) acc += kGL8Weights[q] * f(mid + half * kGL8Nodes[q]);
  return half * acc;
}

/// Neumaier-compensated accumulator. Summation order is the caller's, so
/// results are reproducible for a fixed order.
class KahanSum {
 public:
  void add(double v) noexcept {
    const double t = sum_ + v;
    if (std::abs(sum_) >= std::abs(v))
      comp_ += (sum_ - t) + v;
    else
      comp_ += (v - t) + sum_;
    sum_ = t;
  }
  KahanSum& operator+=(double v) noexcept {
    add(v);
    return *this;
  }
  [[nodiscard]] double value() const noexcept { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

/// Sorted, de-duplicated cut points strictly inside (a, b), with a and b
/// prepended/appended.
inline std::vector<double> partition(double a, double b, std::span<const double> cuts) {
  std::vector<double> pts;
  pts.reserve(cuts.size() + 2);
  pts.push_back(a);
  for (double c : cuts)
    if (c > a && c < b) pts.push_back(c);
  std::sort(pts.begin() + 1, pts.end());
  pts.push_back(b);
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  return pts;
}

/// Composite 8-point rule over [a, b] split at the given cut points.
template <class F>
double composite(F&& f, double a, double b, std::span<const double> cuts) {
  if (b == a) return 0.0;
  if (b < a) return -composite(f, b, a, cuts);
  const auto pts = partition(a, b, cuts);
  KahanSum acc;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) acc += gauss8(f, pts[i], pts[i + 1]);
  return acc.value();
}

/// Composite rule for a 1-periodic integrand over [a, b]: cuts are given in
/// [0, 1) and replicated in every period touched.
template <class F>
double composite_periodic(F&& f, double a, double b, std::span<const double> unit_cuts) {
  if (b == a) return 0.0;
  if (b < a) return -composite_periodic(f, b, a, unit_cuts);
  std::vector<double> cuts;
  for (double k = std::floor(a); k <= std::ceil(b); k += 1.0) {
    cuts.push_back(k);
    for (double c : unit_cuts) cuts.push_back(k + c);
  }
  return composite(f, a, b, cuts);
}

}  // namespace rdh::quad
