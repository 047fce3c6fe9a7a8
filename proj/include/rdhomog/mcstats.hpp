#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "rdhomog/diffeo.hpp"
#include "rdhomog/exact1d.hpp"
#include "rdhomog/fields.hpp"
#include "rdhomog/parallel.hpp"
#include "rdhomog/seeding.hpp"
#include "rdhomog/stats.hpp"

namespace rdh {

/// A one-dimensional configuration: law, coefficient, source and the derived
/// homogenized data.
struct Model1D {
  DiffeoLaw law;
  PeriodicScalarField a_per;
  SourceTerm f;
  Homog1D h;

  Model1D(DiffeoLaw law_, PeriodicScalarField a_, SourceTerm f_)
      : law(std::move(law_)), a_per(std::move(a_)), f(std::move(f_)), h(a_star(law, a_per)) {}

  /// Path of realization `index` under `master` seed, realized over the cells
  /// that (0, 1/eps) touches.
  [[nodiscard]] DiffeoPath path(std::uint64_t master, std::size_t index, double eps) const {
    const auto cells = static_cast<std::int64_t>(std::ceil(1.0 / (eps * law.nu()))) + 1;
    return sample_path(law, 0, cells, seeding::sample_seed(master, static_cast<std::int64_t>(index)));
  }
};

/// Name/statistic/threshold/verdict of one statistical check.
struct CheckResult {
  std::string name;
  double statistic = 0.0;
  double threshold = 0.0;
  bool pass = false;
};

struct EnsembleOptions {
  std::size_t workers = 1;
  bool norms = false;  // also compute L2/H1 error norms per sample
};

/// M realizations of the residual process at one eps. Sample i depends only
/// on (seed, i).
struct Ensemble {
  double eps = 0.0;
  std::uint64_t seed = 0;
  std::vector<double> grid;
  std::vector<std::vector<double>> scaled_residual;  // (u_eps - u_star)/sqrt(eps), M x grid
  std::vector<std::vector<double>> scaled_leading;   // G_eps = leading/sqrt(eps)
  std::vector<double> max_mismatch;                  // remainder identity check per sample
  std::vector<double> residual_l2sq;
  std::vector<double> remainder_l2sq;
  std::vector<double> h1_error;

  [[nodiscard]] std::size_t size() const noexcept { return scaled_residual.size(); }

  [[nodiscard]] std::vector<double> residual_column(std::size_t g) const {
    std::vector<double> c(size());
    for (std::size_t i = 0; i < size(); ++i) c[i] = scaled_residual[i][g];
    return c;
  }
  [[nodiscard]] std::vector<double> leading_column(std::size_t g) const {
    std::vector<double> c(size());
    for (std::size_t i = 0; i < size(); ++i) c[i] = scaled_leading[i][g];
    return c;
  }
};

inline Ensemble run_ensemble(const Model1D& model, double eps, std::size_t M, std::span<const double> grid,
                             std::uint64_t seed, const EnsembleOptions& opt = {}) {
  if (M < 2) throw ValidationError("ensemble needs M >= 2");
  if (!(eps > 0.0)) throw ValidationError("ensemble needs eps > 0");
  Ensemble e;
  e.eps = eps;
  e.seed = seed;
  e.grid.assign(grid.begin(), grid.end());
  e.scaled_residual.resize(M);
  e.scaled_leading.resize(M);
  e.max_mismatch.resize(M);
  if (opt.norms) {
    e.residual_l2sq.resize(M);
    e.remainder_l2sq.resize(M);
    e.h1_error.resize(M);
  }
  const double scale = 1.0 / std::sqrt(eps);
  parallel_for(M, opt.workers, [&](std::size_t i) {
    const auto path = model.path(seed, i, eps);
    const OscillatorySolution sol(path, model.a_per, model.f, model.h, eps);
    auto dec = residual_decompose(sol, grid);
    for (double& v : dec.residual) v *= scale;
    for (double& v : dec.leading) v *= scale;
    e.scaled_residual[i] = std::move(dec.residual);
    e.scaled_leading[i] = std::move(dec.leading);
    e.max_mismatch[i] = dec.max_mismatch;
    if (opt.norms) {
      const auto n = error_norms(sol);
      e.residual_l2sq[i] = n.residual_l2sq;
      e.remainder_l2sq[i] = n.remainder_l2sq;
      e.h1_error[i] = n.h1_corrector_sq;
    }
  });
  return e;
}

/// Unbiased sample covariance with a batch-means standard error (50 batches
/// of the centered products).
inline stats::Estimate empirical_cov(std::span<const double> x, std::span<const double> y, std::size_t batches = 50) {
  if (x.size() != y.size()) throw ValidationError("empirical_cov: sample sizes differ");
  if (x.size() < 2) throw ValidationError("empirical_cov: degenerate ensemble (M < 2)");
  const double mx = stats::mean(x);
  const double my = stats::mean(y);
  std::vector<double> prod(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) prod[i] = (x[i] - mx) * (y[i] - my);
  const auto n = static_cast<double>(x.size());
  const double cov = stats::mean(prod) * n / (n - 1.0);
  return {cov, stats::batch_means_se(prod, batches) * n / (n - 1.0)};
}

inline stats::Estimate empirical_cov(const Ensemble& e, std::size_t x_idx, std::size_t y_idx) {
  return empirical_cov(e.residual_column(x_idx), e.residual_column(y_idx));
}

/// Limit law of the residual process: the centered Gaussian process with
/// covariance c^2 int_0^1 K_0(x,t) K_0(y,t) dt.
struct GaussianLimitModel {
  double c_sq = 0.0;
  SourceTerm f;

  GaussianLimitModel(const Homog1D& h, SourceTerm f_) : c_sq(h.c_sq), f(std::move(f_)) {}
  explicit GaussianLimitModel(const Model1D& m) : GaussianLimitModel(m.h, m.f) {}

  /// int_0^1 K_0(x,t) K_0(y,t) dt, split at x, y and the source breakpoints.
  [[nodiscard]] double kernel_product(double x, double y) const {
    std::vector<double> cuts{x, y};
    cuts.insert(cuts.end(), f.breakpoints().begin(), f.breakpoints().end());
    return quad::composite([&](double t) { return kernel_K0(f, x, t) * kernel_K0(f, y, t); }, 0.0, 1.0, cuts);
  }

  [[nodiscard]] Eigen::MatrixXd covariance_matrix(std::span<const double> grid) const {
    const auto n = static_cast<Eigen::Index>(grid.size());
    Eigen::MatrixXd C(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j <= i; ++j)
        C(i, j) = C(j, i) = c_sq * kernel_product(grid[static_cast<std::size_t>(i)], grid[static_cast<std::size_t>(j)]);
    return C;
  }
};

inline double limit_cov(const GaussianLimitModel& glm, double x, double y) {
  if (x < 0.0 || x > 1.0 || y < 0.0 || y > 1.0) throw ValidationError("limit_cov: x, y must lie in [0,1]");
  return glm.c_sq * glm.kernel_product(x, y);
}

/// Moment z-scores and KS distance of a sample against Normal(0, target_var).
struct CltReport {
  std::size_t n = 0;
  double target_var = 0.0;
  double mean = 0.0;
  double variance = 0.0;
  double skewness = 0.0;
  double excess_kurtosis = 0.0;
  double ks = 0.0;
  double ks_critical = 0.0;
  std::vector<CheckResult> checks;

  [[nodiscard]] bool pass() const {
    return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.pass; });
  }
  [[nodiscard]] const CheckResult& check(const std::string& name) const {
    for (const auto& c : checks)
      if (c.name == name) return c;
    throw ValidationError("no check named " + name);
  }
};

inline CltReport clt_check(std::span<const double> samples, double target_var, double z_threshold = 4.0) {
  if (samples.size() < 1000) throw ValidationError("clt_check needs at least 1000 samples");
  if (!(target_var > 0.0)) throw ValidationError("clt_check needs a positive target variance");
  CltReport r;
  const auto n = static_cast<double>(samples.size());
  r.n = samples.size();
  r.target_var = target_var;
  r.mean = stats::mean(samples);
  r.variance = stats::variance(samples);
  std::tie(r.skewness, r.excess_kurtosis) = stats::skew_kurtosis(samples);
  r.ks = stats::ks_normal(samples, target_var);
  r.ks_critical = stats::ks_critical(samples.size());

  auto z_check = [&](std::string name, double z) {
    const double az = std::abs(z);
    r.checks.push_back({std::move(name), az, z_threshold, std::isfinite(az) && az < z_threshold});
  };
  z_check("mean_z", r.mean / std::sqrt(target_var / n));
  z_check("variance_z", (r.variance - target_var) / (target_var * std::sqrt(2.0 / (n - 1.0))));
  z_check("skewness_z", r.skewness / std::sqrt(6.0 / n));
  z_check("kurtosis_z", r.excess_kurtosis / std::sqrt(24.0 / n));
  r.checks.push_back({"ks_distance", r.ks, r.ks_critical, r.ks < r.ks_critical});
  return r;
}

/// Zbar_eps = eps^{-1/2} int_alpha^beta A(t) psi(phi^{-1}(t/eps)) dt for M
/// independent paths.
template <class Weight>
std::vector<double> zbar_samples(const Model1D& model, double eps, std::size_t M, std::uint64_t seed, double alpha,
                                 double beta, Weight weight, std::span<const double> weight_breaks,
                                 std::size_t workers = 1) {
  if (!(alpha >= 0.0 && alpha < beta && beta <= 1.0)) throw ValidationError("need 0 <= alpha < beta <= 1");
  std::vector<double> z(M);
  const double scale = 1.0 / std::sqrt(eps);
  parallel_for(M, workers, [&](std::size_t i) {
    const auto path = model.path(seed, i, eps);
    z[i] = scale * weighted_psi_integral(path, model.a_per, model.h, eps, alpha, beta, weight, weight_breaks);
  });
  return z;
}

/// Z_eps(alpha, beta) samples (weight A = 1).
inline std::vector<double> z_samples(const Model1D& model, double eps, std::size_t M, std::uint64_t seed,
                                     double alpha, double beta, std::size_t workers = 1) {
  return zbar_samples(model, eps, M, seed, alpha, beta, [](double) { return 1.0; }, {}, workers);
}

/// sqrt(eps) * sum_{k < count} Y_k with Y_k = int_k^{k+1} psi phi', M paths.
inline std::vector<double> cell_sum_samples(const Model1D& model, double eps, std::int64_t count, std::size_t M,
                                            std::uint64_t seed, std::size_t workers = 1) {
  std::vector<double> out(M);
  const auto cuts = detail::cell_cuts(model.a_per, model.law);
  const double se = std::sqrt(eps);
  parallel_for(M, workers, [&](std::size_t i) {
    const auto path = sample_path(model.law, 0, count, seeding::sample_seed(seed, static_cast<std::int64_t>(i)));
    quad::KahanSum acc;
    for (std::int64_t k = 0; k < count; ++k) {
      const auto kd = static_cast<double>(k);
      acc += quad::composite_periodic(
          [&](double s) { return psi(model.a_per, model.h, s) * path.phi_prime(s); }, kd, kd + 1.0, cuts);
    }
    out[i] = se * acc.value();
  });
  return out;
}

struct MomentRow {
  double eps = 0.0;
  int p = 1;
  double moment = 0.0;  // E[Z^{2p}]
  double se = 0.0;
  double denominator = 0.0;  // (beta - alpha)^p + eps^{(p-1)/2}
  double ratio = 0.0;
};

struct MomentReport {
  double alpha = 0.0;
  double beta = 1.0;
  std::vector<MomentRow> rows;
  std::vector<CheckResult> checks;  // per p: max ratio <= 10 x median ratio

  [[nodiscard]] bool pass() const {
    return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.pass; });
  }
};

inline double median(std::vector<double> v) {
  if (v.empty()) throw ValidationError("median of empty sample");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

/// Empirical E[Z_eps(alpha,beta)^{2p}] over an eps ladder, normalized by
/// (beta - alpha)^p + eps^{(p-1)/2}. Boundedness is the check: the ratio's
/// maximum over the ladder may not exceed 10 times its median.
inline MomentReport moment_bound_check(const Model1D& model, std::span<const int> ps, std::span<const double> eps_list,
                                       double alpha, double beta, std::size_t M, std::uint64_t seed,
                                       std::size_t workers = 1) {
  for (int p : ps)
    if (p < 1 || p > 4) throw ValidationError("moment_bound_check: p must be in [1, 4]");
  MomentReport rep;
  rep.alpha = alpha;
  rep.beta = beta;
  for (double eps : eps_list) {
    const auto z = z_samples(model, eps, M, seed, alpha, beta, workers);
    for (int p : ps) {
      std::vector<double> zp(z.size());
      for (std::size_t i = 0; i < z.size(); ++i) zp[i] = std::pow(z[i], 2 * p);
      MomentRow row;
      row.eps = eps;
      row.p = p;
      const auto est = stats::mean_with_se(zp);
      row.moment = est.value;
      row.se = est.se;
      row.denominator = std::pow(beta - alpha, p) + std::pow(eps, 0.5 * (p - 1));
      row.ratio = row.moment / row.denominator;
      rep.rows.push_back(row);
    }
  }
  for (int p : ps) {
    std::vector<double> ratios;
    for (const auto& r : rep.rows)
      if (r.p == p) ratios.push_back(r.ratio);
    const double mx = *std::max_element(ratios.begin(), ratios.end());
    const double med = median(ratios);
    const double stat = med > 0.0 ? mx / med : (mx > 0.0 ? INFINITY : 0.0);
    rep.checks.push_back({"moment_ratio_bounded_p" + std::to_string(p), stat, 10.0, stat <= 10.0});
  }
  return rep;
}

/// E|G_eps(x) - G_eps(y)|^{2p} for several separations, normalized by
/// |x - y|^{(p-1)/2}; the normalized moment may not grow by more than a
/// factor 10 as the separation shrinks (relative to the largest separation).
struct IncrementReport {
  int p = 3;
  std::vector<double> separations;
  std::vector<double> moments;
  std::vector<double> ratios;
  CheckResult check;
};

inline IncrementReport increment_moment_check(const Ensemble& e, std::size_t x_idx, std::span<const std::size_t> y_idx,
                                              int p = 3) {
  IncrementReport rep;
  rep.p = p;
  const auto gx = e.leading_column(x_idx);
  for (std::size_t yi : y_idx) {
    const auto gy = e.leading_column(yi);
    const double sep = std::abs(e.grid[yi] - e.grid[x_idx]);
    std::vector<double> d(gx.size());
    for (std::size_t i = 0; i < gx.size(); ++i) d[i] = std::pow(std::abs(gx[i] - gy[i]), 2 * p);
    const double m = stats::mean(d);
    rep.separations.push_back(sep);
    rep.moments.push_back(m);
    rep.ratios.push_back(m / std::pow(sep, 0.5 * (p - 1)));
  }
  const auto widest = static_cast<std::size_t>(
      std::max_element(rep.separations.begin(), rep.separations.end()) - rep.separations.begin());
  const double ref = rep.ratios[widest];
  const double worst = *std::max_element(rep.ratios.begin(), rep.ratios.end());
  const double stat = ref > 0.0 ? worst / ref : 0.0;
  rep.check = {"increment_moment_scaling_p" + std::to_string(p), stat, 10.0, stat <= 10.0};
  return rep;
}

}  // namespace rdh
