#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "rdhomog/diffeo.hpp"
#include "rdhomog/fields.hpp"
#include "rdhomog/seeding.hpp"
#include "rdhomog/stats.hpp"
#include "test_configs.hpp"

namespace rdh {
namespace {

using testing::c1_coefficient;
using testing::c1_law;
using testing::c2_law;

TEST(DiffeoLaw, RejectsAmplitudeOutsideUnitInterval) {
  EXPECT_THROW(DiffeoLaw(1.2), ValidationError);
  EXPECT_THROW(DiffeoLaw(1.0), ValidationError);
  EXPECT_THROW(DiffeoLaw(-0.1), ValidationError);
  EXPECT_NO_THROW(DiffeoLaw(0.0));
}

TEST(DiffeoLaw, DerivedConstants) {
  const auto law = c2_law();
  EXPECT_DOUBLE_EQ(law.nu(), 0.51);
  EXPECT_DOUBLE_EQ(law.M_bound(), 1.49);
  EXPECT_DOUBLE_EQ(law.mean_X(), 0.0);
  EXPECT_NEAR(law.var_X(), 0.49 / 3.0, 1e-15);
  EXPECT_DOUBLE_EQ(law.mean_D(), 1.0);

  const DiffeoLaw pos(0.7, XDist::UniformPositive);
  EXPECT_DOUBLE_EQ(pos.mean_X(), 0.35);
  EXPECT_NEAR(pos.var_X(), 0.49 / 12.0, 1e-15);
  const DiffeoLaw two(0.7, XDist::TwoPoint);
  EXPECT_NEAR(two.var_X(), 0.49, 1e-15);
}

TEST(SamplePath, ZeroAmplitudeIsIdentity) {
  const auto path = sample_path(c1_law(), -5, 50, 1234);
  for (std::int64_t k = -5; k < 50; ++k) EXPECT_EQ(path.X(k), 0.0);
  EXPECT_DOUBLE_EQ(path.phi(2.75), 2.75);
  EXPECT_DOUBLE_EQ(path.phi_prime(0.3), 1.0);
  EXPECT_DOUBLE_EQ(path.phi_inverse(3.2), 3.2);
}

TEST(SamplePath, CellValuesIndependentOfRangeShape) {
  const auto law = c2_law();
  const auto a = sample_path(law, 0, 10, 99);
  const auto b = sample_path(law, -40, 200, 99);
  for (std::int64_t k = 0; k < 10; ++k) EXPECT_EQ(a.X(k), b.X(k));
  // Outside the cached range values are drawn on the fly and must agree too.
  for (std::int64_t k = 150; k < 160; ++k) EXPECT_EQ(a.X(k), b.X(k));
  EXPECT_EQ(a.phi_at_integer(150), b.phi_at_integer(150));
}

TEST(SamplePath, ExtendingKeepsRealizedValues) {
  const auto law = c2_law();
  auto p = DiffeoPath::with_cells(law, 0, {0.1, -0.2, 0.3}, 5);
  p.extend(-10, 40);
  EXPECT_EQ(p.X(0), 0.1);
  EXPECT_EQ(p.X(1), -0.2);
  EXPECT_EQ(p.X(2), 0.3);
  EXPECT_EQ(p.X(20), law.draw_X(seeding::cell_key(5, 20)));
}

TEST(SamplePath, SampleMeanOfCenteredCellsWithinClt) {
  const auto path = sample_path(c2_law(), 0, 10000, 2024);
  double sum = 0.0;
  for (std::int64_t k = 0; k < 10000; ++k) sum += path.X(k);
  EXPECT_LE(std::abs(sum / 1e4), 4.0 * (0.7 / std::sqrt(3.0)) / 100.0);
}

TEST(Phi, ClosedFormForSineCell) {
  const auto p = DiffeoPath::with_cells(c2_law(), 0, {0.7});
  EXPECT_NEAR(p.phi(1.0), 1.0, 1e-15);
  EXPECT_NEAR(p.phi(0.5), 0.5 + 0.49 / std::numbers::pi, 1e-15);
  EXPECT_NEAR(p.phi_inverse(0.5 + 0.49 / std::numbers::pi), 0.5, 1e-12);
  const auto q = DiffeoPath::with_cells(c2_law(), 0, {0.5});
  EXPECT_NEAR(q.phi_prime(0.25), 1.35, 1e-15);
}

TEST(Phi, DerivativeBoundsAtRandomPoints) {
  const auto law = c2_law();
  const auto p = sample_path(law, -100, 100, 77);
  for (int i = 0; i < 100000; ++i) {
    const double y = 200.0 * seeding::to_unit(seeding::mix(3, 0, i)) - 100.0;
    const double d = p.phi_prime(y);
    ASSERT_GE(d, 0.51);
    ASSERT_LE(d, 1.49);
  }
}

TEST(Phi, MonotoneAndRoundTrip) {
  for (GShape g : {GShape::Sine, GShape::Haar}) {
    const auto p = sample_path(c2_law(g), -20, 20, 8);
    for (int i = 0; i < 2000; ++i) {
      const double y1 = 40.0 * seeding::to_unit(seeding::mix(4, 0, i)) - 20.0;
      const double y2 = y1 + 1e-3 + 5.0 * seeding::to_unit(seeding::mix(4, 1, i));
      ASSERT_LT(p.phi(y1), p.phi(y2));
      ASSERT_NEAR(p.phi_inverse(p.phi(y1)), y1, 10 * 1e-12 * std::max(1.0, std::abs(y1)));
    }
  }
}

// Haar shape: phi is affine on each half cell, so the inverse has a closed form.
TEST(Phi, InverseMatchesPiecewiseAffineOracle) {
  const auto law = c2_law(GShape::Haar);
  const auto p = sample_path(law, 0, 30, 11);
  for (int i = 0; i < 500; ++i) {
    const double z = 25.0 * seeding::to_unit(seeding::mix(6, 0, i));
    std::int64_t k = 0;
    while (p.phi_at_integer(k + 1) <= z) ++k;
    const double rel = z - p.phi_at_integer(k);
    const double slope_lo = 1.0 + p.X(k) * 0.7;
    const double slope_hi = 1.0 - p.X(k) * 0.7;
    const double y = rel < 0.5 * slope_lo ? rel / slope_lo : 0.5 + (rel - 0.5 * slope_lo) / slope_hi;
    ASSERT_NEAR(p.phi_inverse(z), static_cast<double>(k) + y, 1e-12);
  }
}

TEST(Phi, NegativeArguments) {
  const auto p = sample_path(c2_law(), -3, 3, 21);
  EXPECT_EQ(p.phi(0.0), 0.0);
  EXPECT_LT(p.phi(-2.5), p.phi(-2.0));
  EXPECT_NEAR(p.phi(-1.0), -p.D(-1), 1e-15);
  EXPECT_NEAR(p.phi_inverse(p.phi(-2.3)), -2.3, 1e-12);
  // Beyond the cached range.
  EXPECT_NEAR(p.phi_inverse(p.phi(-17.6)), -17.6, 1e-11);
}

TEST(Increments, StationaryAcrossCells) {
  // Cell integrals of phi' and of psi phi' at k = 0 and k = 7 over
  // independent paths must share one distribution.
  const auto law = c2_law();
  const auto a = c1_coefficient();
  const double inv_a_star = 0.625;
  auto cell_y = [&](const DiffeoPath& p, std::int64_t k) {
    return quad::composite(
        [&](double s) { return (1.0 / a(s) - inv_a_star) * p.phi_prime(s); }, static_cast<double>(k),
        static_cast<double>(k + 1), std::vector<double>{static_cast<double>(k) + 0.5});
  };
  std::vector<double> d0, d7, y0, y7;
  for (int i = 0; i < 10000; ++i) {
    const auto p = sample_path(law, 0, 8, seeding::sample_seed(42, i));
    d0.push_back(p.D(0));
    d7.push_back(p.phi(8.0) - p.phi(7.0));
    y0.push_back(cell_y(p, 0));
    y7.push_back(cell_y(p, 7));
  }
  EXPECT_LT(stats::ks_two_sample(d0, d7), stats::ks_critical(d0.size(), d7.size()));
  EXPECT_LT(stats::ks_two_sample(y0, y7), stats::ks_critical(y0.size(), y7.size()));
  // Centered amplitudes: mean_D is exactly one.
  EXPECT_NEAR(stats::mean(d0), law.mean_D(), 4.0 * stats::batch_means_se(d0) + 1e-15);
}

TEST(Increments, PresetShapesHaveUnitIncrements) {
  // Both preset shapes integrate to zero over a cell, so D_k = 1 even for
  // non-centered amplitudes.
  const DiffeoLaw law(0.7, XDist::UniformPositive, GShape::Haar);
  const auto p = sample_path(law, 0, 1000, 3);
  for (std::int64_t k = 0; k < 1000; ++k) ASSERT_NEAR(p.D(k), 1.0, 1e-15);
  EXPECT_DOUBLE_EQ(law.mean_D(), 1.0);
}

TEST(VerifyAssumptions, C2LawAndC1Coefficient) {
  const auto rep = verify_assumptions(c2_law(), c1_coefficient());
  EXPECT_TRUE(rep.pass());
  EXPECT_DOUBLE_EQ(rep.nu, 0.51);
  EXPECT_DOUBLE_EQ(rep.M_bound, 1.49);
  EXPECT_EQ(rep.a_minus, 1.0);
  EXPECT_EQ(rep.a_plus, 4.0);
}

TEST(VerifyAssumptions, ReportsBadBoundsWithoutThrowing) {
  const auto lying = PeriodicScalarField::custom("lying", [](double u) { return 1.0 + u; }, {}, 1.0, 1.5);
  const auto rep = verify_assumptions(c2_law(), lying);
  EXPECT_FALSE(rep.pass());
}

TEST(VerifyAssumptions, MatrixFieldCoercivity) {
  const auto lam = PeriodicMatrixField<2>::laminate(c1_coefficient());
  EXPECT_TRUE(verify_assumptions(c2_law(), lam).pass());
  const auto cb = PeriodicMatrixField<2>::checkerboard(1.0, 4.0);
  EXPECT_TRUE(verify_assumptions(c2_law(), cb).pass());
  EXPECT_THROW(PeriodicScalarField::constant(0.0), ValidationError);
}

TEST(PeriodicScalarField, PeriodicAndBounded) {
  const auto a = c1_coefficient();
  EXPECT_EQ(a(0.25), 1.0);
  EXPECT_EQ(a(0.75), 4.0);
  EXPECT_EQ(a(-0.25), 4.0);
  EXPECT_EQ(a(7.5), 4.0);
  const auto c = PeriodicScalarField::cosine(2.0, 0.5);
  EXPECT_NEAR(c(0.3), c(3.3), 1e-12);
  EXPECT_EQ(c.a_minus(), 1.5);
}

TEST(SourceTerm, PrimitivesAgreeWithQuadrature) {
  const auto pw = SourceTerm::piecewise_constant({0.0, 0.3, 0.7}, {1.0, -2.0, 0.5});
  const auto num = SourceTerm::numeric(
      "pw", [](double t) { return t < 0.3 ? 1.0 : (t < 0.7 ? -2.0 : 0.5); }, {0.3, 0.7});
  for (double t : {0.0, 0.1, 0.3, 0.45, 0.7, 0.9, 1.0}) {
    EXPECT_NEAR(pw.F(t), num.F(t), 1e-13);
    EXPECT_NEAR(pw.F_integral(t), num.F_integral(t), 1e-13);
  }
  const auto s = SourceTerm::sine();
  EXPECT_NEAR(s.F(1.0), 0.0, 1e-15);
  EXPECT_NEAR(s.c_star(), 1.0 / (2.0 * std::numbers::pi), 1e-15);
  EXPECT_EQ(SourceTerm::constant(1.0).c_star(), 0.5);
  EXPECT_EQ(SourceTerm::constant(1.0).F(0.0), 0.0);
}

TEST(TensorDiffeo, DiagonalGradientAndAdjugate) {
  const TensorDiffeoField<2> phi(c2_law(), 17, 8);
  for (int i = 0; i < 1000; ++i) {
    Eigen::Vector2d y(8.0 * seeding::to_unit(seeding::mix(9, 0, i)), 8.0 * seeding::to_unit(seeding::mix(9, 1, i)));
    const Eigen::Matrix2d g = phi.grad(y);
    ASSERT_EQ(g(0, 1), 0.0);
    ASSERT_EQ(g(1, 0), 0.0);
    ASSERT_GE(g.determinant(), 0.51 * 0.51);
    const Eigen::Matrix2d adj{{g(1, 1), 0.0}, {0.0, g(0, 0)}};
    ASSERT_TRUE((adj - g.determinant() * g.inverse()).cwiseAbs().maxCoeff() < 1e-14);
  }
  // Axes are independent realizations.
  EXPECT_NE(phi.axis(0).X(0), phi.axis(1).X(0));
}

}  // namespace
}  // namespace rdh
