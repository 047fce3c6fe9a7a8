#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "rdhomog/homogenize.hpp"
#include "test_configs.hpp"

using namespace rdh;

namespace {

PeriodicMatrixField<2> c3_matrix() { return PeriodicMatrixField<2>::laminate(rdh::testing::c1_coefficient()); }

HomogenizedEstimate<2> identity_estimate(const PeriodicMatrixField<2>& A, std::int64_t N, std::int64_t r) {
  const TensorDiffeoField<2> phi(DiffeoLaw::identity(), 0, N);
  return estimate_A_star(build_mesh<2>(N, r), phi, A);
}

// Aitken extrapolation of a sequence with geometric error decay.
double aitken(double x0, double x1, double x2) {
  const double d1 = x1 - x0;
  const double d2 = x2 - x1;
  return x2 - d2 * d2 / (d2 - d1);
}

}  // namespace

TEST(AlphaBeta, IdentityExactly) {
  const TensorDiffeoField<2> phi(DiffeoLaw::identity(), 0, 5);
  const auto [alpha, beta] = alpha_beta(phi, 5);
  EXPECT_EQ(alpha, Eigen::Matrix2d::Identity());
  EXPECT_EQ(beta, Eigen::Matrix2d::Identity());
}

TEST(AlphaBeta, BetaIsAdjugateOfAlpha) {
  for (auto law : {rdh::testing::c2_law(), rdh::testing::c2p_law(), rdh::testing::c2_law(GShape::Haar)}) {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
      for (std::int64_t N : {1, 3, 16}) {
        const TensorDiffeoField<2> phi(law, seed, N);
        const auto [alpha, beta] = alpha_beta(phi, N);
        EXPECT_LE((beta - adjugate<2>(alpha)).cwiseAbs().maxCoeff(), 1e-12);
        EXPECT_GE(alpha.determinant(), law.nu() * law.nu());
      }
    }
  }
}

// Both G presets have zero cell integral, so D_k = 1 and alpha_N = I for
// every realization; the mean deviation is then zero at every N.
TEST(AlphaBeta, AlphaTendsToIdentity) {
  const auto law = rdh::testing::c2_law();
  std::vector<double> dev;
  for (std::int64_t N : {2, 8, 32}) {
    double s = 0.0;
    const int M = 400;
    for (int i = 0; i < M; ++i) {
      const TensorDiffeoField<2> phi(law, seeding::study_seed(5, N, i), N);
      s += (alpha_beta(phi, N).first - Eigen::Matrix2d::Identity()).cwiseAbs().maxCoeff();
    }
    dev.push_back(s / M);
  }
  EXPECT_LE(dev[1], dev[0]);
  EXPECT_LE(dev[2], dev[1]);
  EXPECT_LE(dev[0], 1e-15);
}

TEST(EstimateAStar, IdentityGivesIdentity) {
  for (std::int64_t N : {1, 2, 3}) {
    const auto e = identity_estimate(PeriodicMatrixField<2>::identity(), N, 4);
    EXPECT_LE((e.A_star - Eigen::Matrix2d::Identity()).cwiseAbs().maxCoeff(), 1e-8);
  }
}

TEST(EstimateAStar, LaminateArithmeticAndHarmonicMeans) {
  const auto ref = identity_estimate(c3_matrix(), 1, 16);
  for (std::int64_t N : {1, 2, 4}) {
    const auto e = identity_estimate(c3_matrix(), N, 16);
    EXPECT_NEAR(e.A_star(0, 0), 1.6, 0.02 * 1.6);
    EXPECT_NEAR(e.A_star(1, 1), 2.5, 0.02 * 2.5);
    EXPECT_NEAR(e.A_star(0, 1), 0.0, 1e-8);
    EXPECT_LE((e.A_star - ref.A_star).cwiseAbs().maxCoeff(), 1e-8);
  }
}

TEST(EstimateAStar, CheckerboardGeometricMean) {
  const auto A = PeriodicMatrixField<2>::checkerboard(1.0, 4.0);
  const auto e16 = identity_estimate(A, 1, 16);
  const auto e32 = identity_estimate(A, 1, 32);
  const auto e64 = identity_estimate(A, 1, 64);
  const double extrapolated = aitken(e16.A_star(0, 0), e32.A_star(0, 0), e64.A_star(0, 0));
  EXPECT_NEAR(extrapolated, 2.0, 1e-3);
  EXPECT_LE((e32.A_star - 2.0 * Eigen::Matrix2d::Identity()).cwiseAbs().maxCoeff(), 0.03 * 2.0);
  EXPECT_LE(std::abs(e32.A_star(0, 0) - extrapolated), 0.03 * extrapolated);
}

TEST(EstimateAStar, StructuralPropertiesOnRandomSamples) {
  const auto law = rdh::testing::c2_law();
  const auto A = c3_matrix();
  const double upper = A.a_plus() * std::pow(law.M_bound(), 2) / std::pow(law.nu(), 2);
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    const std::int64_t N = 1 + static_cast<std::int64_t>(seed % 3);
    const TensorDiffeoField<2> phi(law, seed, N);
    const auto e = estimate_A_star(build_mesh<2>(N, 8), phi, seed % 2 ? A : PeriodicMatrixField<2>::checkerboard(1, 4));
    EXPECT_EQ(e.A_star, e.B_star / e.alpha.determinant());
    EXPECT_LE((e.B_star - e.B_star.transpose()).cwiseAbs().maxCoeff(), 1e-8);
    EXPECT_LE((e.A_star - e.A_star.transpose()).cwiseAbs().maxCoeff(), 1e-8);
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(0.5 * (e.A_star + e.A_star.transpose()));
    EXPECT_GE(es.eigenvalues().minCoeff(), 1e-6);
    EXPECT_LE(es.eigenvalues().maxCoeff(), upper);
  }
}

TEST(EstimateAStar, BStarEqualsEnergyForm) {
  // For symmetric A_per, B*_jj equals the energy of p + grad w.
  const auto law = rdh::testing::c2_law();
  const TensorDiffeoField<2> phi(law, 77, 2);
  const auto mesh = build_mesh<2>(2, 8);
  const auto A = PeriodicMatrixField<2>::checkerboard(1, 4);
  const auto e = estimate_A_star(mesh, phi, A);
  const auto s = sample_coefficients(mesh, phi, A);
  const auto K = assemble_stiffness(mesh, s);
  for (int j = 0; j < 2; ++j) {
    const auto w = solve_corrector(mesh, K, s, j).w;
    double energy = 0.0;
    for (std::int64_t el = 0; el < mesh.elements(); ++el)
      for (int q = 0; q < 4; ++q) {
        const auto i = static_cast<std::size_t>(el) * 4 + q;
        const Eigen::Vector2d v = Eigen::Vector2d::Unit(j) + s.inv[i].transpose() * nodal_gradient(mesh, w, el, q);
        energy += mesh.weight() * s.det[i] * v.dot(s.A[i] * v);
      }
    energy /= mesh.volume();
    EXPECT_NEAR(e.B_star(j, j), energy, 1e-8);
  }
}

TEST(Study, DeterministicConfigHasZeroSpread) {
  const std::vector<std::int64_t> Ns{1, 2, 4};
  const auto t = convergence_study<2>(DiffeoLaw::identity(), c3_matrix(), Ns, 3, 0, {16, 1e-10, 1});
  ASSERT_EQ(t.rows.size(), 3u);
  EXPECT_TRUE(std::isnan(t.rows[0].cauchy_diff));
  for (const auto& row : t.rows) {
    EXPECT_EQ(row.std, Eigen::Matrix2d::Zero());
    EXPECT_NEAR(row.mean(0, 0), 1.6, 0.032);
    EXPECT_NEAR(row.mean(1, 1), 2.5, 0.05);
  }
}

TEST(Study, RejectsBadInputs) {
  const auto A = c3_matrix();
  const auto law = rdh::testing::c2_law();
  EXPECT_THROW(convergence_study<2>(law, A, {4, 2}, 4, 0), ValidationError);
  EXPECT_THROW(convergence_study<2>(law, A, {2, 2}, 4, 0), ValidationError);
  EXPECT_THROW(convergence_study<2>(law, A, {2, 4}, 1, 0), ValidationError);
  EXPECT_THROW(convergence_study<2>(law, A, {}, 4, 0), ValidationError);
}

TEST(Study, ErrorsCarryNAndIndex) {
  try {
    convergence_study<2>(rdh::testing::c2_law(), c3_matrix(), {2}, 3, 0, {8, 1e-30, 1});
    FAIL();
  } catch (const NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("N = 2, sample 0:"), std::string::npos) << e.what();
  }
}

TEST(Study, IndependentOfWorkers) {
  const auto law = rdh::testing::c2_law();
  const auto a = convergence_study<2>(law, c3_matrix(), {1, 2}, 6, 42, {4, 1e-10, 1});
  const auto b = convergence_study<2>(law, c3_matrix(), {1, 2}, 6, 42, {4, 1e-10, 3});
  for (std::size_t r = 0; r < 2; ++r) {
    EXPECT_EQ(a.rows[r].mean, b.rows[r].mean);
    EXPECT_EQ(a.rows[r].std, b.rows[r].std);
  }
}

TEST(Study, VarianceDecaysAndMeansStabilize) {
  const auto law = rdh::testing::c2_law();
  const auto t = convergence_study<2>(law, c3_matrix(), {2, 4, 8, 16}, 32, 2024, {8, 1e-10, 1});
  const auto& first = t.rows.front();
  const auto& last = t.rows.back();
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      if (first.std(i, j) < 1e-12) continue;  // off-diagonal entries vanish identically for a laminate
      EXPECT_LE(last.std(i, j), 0.5 * first.std(i, j)) << i << j;
    }
  EXPECT_LE(t.rows[3].cauchy_diff, t.rows[2].cauchy_diff);
}

TEST(CrossValidate, DeterministicHarmonicMean) {
  const auto cv = cross_validate_1d(DiffeoLaw::identity(), rdh::testing::c1_coefficient(), 4, 2, 0, {32, 1e-10, 1});
  EXPECT_LE(cv.relative_gap, 0.005);
  EXPECT_NEAR(cv.exact, 1.6, 1e-12);
}

TEST(CrossValidate, RandomLawsMatchExactCoefficient) {
  const auto c2 = cross_validate_1d(rdh::testing::c2_law(), rdh::testing::c1_coefficient(), 64, 64, 7);
  EXPECT_LE(c2.relative_gap, 0.02);
  const auto c2p = cross_validate_1d(rdh::testing::c2p_law(), rdh::testing::c1_coefficient(), 64, 64, 7);
  EXPECT_LE(c2p.relative_gap, 0.02);
  EXPECT_NEAR(c2p.exact, 1.463080, 1e-6);
}
