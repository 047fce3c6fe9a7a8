#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>
#include <utility>
#include <vector>

#include "rdhomog/error.hpp"
#include "rdhomog/quadrature.hpp"

namespace rdh::stats {

/// Asymptotic 1% critical value of the Kolmogorov distribution.
inline constexpr double kKolmogorov99 = 1.6276;

struct Estimate {
  double value = 0.0;
  double se = 0.0;
};

/// Shifted by the first sample, so a constant sample has its exact mean.
inline double mean(std::span<const double> v) {
  if (v.empty()) throw ValidationError("mean of empty sample");
  const double shift = v.front();
  quad::KahanSum s;
  for (double x : v) s += x - shift;
  return shift + s.value() / static_cast<double>(v.size());
}

/// Unbiased sample variance (two-pass).
inline double variance(std::span<const double> v) {
  if (v.size() < 2) throw ValidationError("variance needs at least two samples");
  const double m = mean(v);
  quad::KahanSum s;
  for (double x : v) s += (x - m) * (x - m);
  return s.value() / static_cast<double>(v.size() - 1);
}

/// Standard error of the mean of v by non-overlapping batch means.
inline double batch_means_se(std::span<const double> v, std::size_t batches = 50) {
  const std::size_t n = v.size();
  if (n < 2) throw ValidationError("batch means need at least two samples");
  batches = std::min(batches, n);
  if (batches < 2) batches = 2;
  std::vector<double> bm(batches);
  for (std::size_t b = 0; b < batches; ++b) {
    const std::size_t lo = b * n / batches;
    const std::size_t hi = (b + 1) * n / batches;
    bm[b] = mean(v.subspan(lo, hi - lo));
  }
  return std::sqrt(variance(bm) / static_cast<double>(batches));
}

/// Mean with batch-means standard error.
inline Estimate mean_with_se(std::span<const double> v, std::size_t batches = 50) {
  return {mean(v), batch_means_se(v, batches)};
}

inline double normal_cdf(double x, double variance = 1.0) {
  return 0.5 * std::erfc(-x / std::sqrt(2.0 * variance));
}

/// Sup distance between the empirical CDF of v and Normal(0, variance).
inline double ks_normal(std::span<const double> v, double variance) {
  if (v.empty()) throw ValidationError("KS on empty sample");
  std::vector<double> s(v.begin(), v.end());
  std::sort(s.begin(), s.end());
  const auto n = static_cast<double>(s.size());
  double d = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double F = variance > 0.0 ? normal_cdf(s[i], variance) : (s[i] >= 0.0 ? 1.0 : 0.0);
    d = std::max({d, static_cast<double>(i + 1) / n - F, F - static_cast<double>(i) / n});
  }
  return d;
}

/// Two-sample Kolmogorov-Smirnov distance.
inline double ks_two_sample(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw ValidationError("KS on empty sample");
  std::vector<double> x(a.begin(), a.end());
  std::vector<double> y(b.begin(), b.end());
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  const auto nx = static_cast<double>(x.size());
  const auto ny = static_cast<double>(y.size());
  std::size_t i = 0;
  std::size_t j = 0;
  double d = 0.0;
  while (i < x.size() && j < y.size()) {
    const double t = std::min(x[i], y[j]);
    while (i < x.size() && x[i] <= t) ++i;
    while (j < y.size() && y[j] <= t) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / nx - static_cast<double>(j) / ny));
  }
  return d;
}

inline double ks_critical(std::size_t n) { return kKolmogorov99 / std::sqrt(static_cast<double>(n)); }

inline double ks_critical(std::size_t n, std::size_t m) {
  const auto a = static_cast<double>(n);
  const auto b = static_cast<double>(m);
  return kKolmogorov99 * std::sqrt((a + b) / (a * b));
}

/// Sample skewness and excess kurtosis (moment estimators). Both are NaN when
/// the sample has zero spread.
inline std::pair<double, double> skew_kurtosis(std::span<const double> v) {
  const double m = mean(v);
  quad::KahanSum m2, m3, m4;
  for (double x : v) {
    const double d = x - m;
    m2 += d * d;
    m3 += d * d * d;
    m4 += d * d * d * d;
  }
  const auto n = static_cast<double>(v.size());
  const double s2 = m2.value() / n;
  if (!(s2 > 0.0)) return {std::nan(""), std::nan("")};
  return {m3.value() / n / std::pow(s2, 1.5), m4.value() / n / (s2 * s2) - 3.0};
}

/// Least-squares fit of log(value) = slope * log(eps) + intercept.
struct RateFit {
  std::vector<std::pair<double, double>> pairs;
  double slope = 0.0;
  double intercept = 0.0;
  double residual = 0.0;  // RMS of the log-space residuals
};

inline RateFit rate_fit(std::vector<std::pair<double, double>> pairs) {
  if (pairs.size() < 2) throw ValidationError("rate_fit needs at least two (eps, value) pairs");
  for (const auto& [e, v] : pairs)
    if (!(e > 0.0) || !(v > 0.0)) throw ValidationError("rate_fit needs strictly positive eps and values");
  const auto n = static_cast<double>(pairs.size());
  double sx = 0.0, sy = 0.0;
  for (const auto& [e, v] : pairs) {
    sx += std::log(e);
    sy += std::log(v);
  }
  const double mx = sx / n;
  const double my = sy / n;
  double sxx = 0.0, sxy = 0.0;
  for (const auto& [e, v] : pairs) {
    const double dx = std::log(e) - mx;
    sxx += dx * dx;
    sxy += dx * (std::log(v) - my);
  }
  if (!(sxx > 0.0)) throw ValidationError("rate_fit needs at least two distinct eps values");
  RateFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double rss = 0.0;
  for (const auto& [e, v] : pairs) {
    const double r = std::log(v) - (fit.slope * std::log(e) + fit.intercept);
    rss += r * r;
  }
  fit.residual = std::sqrt(rss / n);
  fit.pairs = std::move(pairs);
  return fit;
}

}  // namespace rdh::stats
