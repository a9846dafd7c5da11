#include <gtest/gtest.h>

#include "lrmc/linalg.hpp"
#include "lrmc/random.hpp"
#include "test_util.hpp"

namespace lrmc {
namespace {

TEST(ReducedSvd, RankOneBasisMatrix) {
  Matrix m = Matrix::Zero(3, 3);
  m(0, 0) = 1.0;
  const SvdFactors f = reduced_svd(m);
  ASSERT_EQ(f.rank(), 1);
  EXPECT_NEAR(f.sigma(0), 1.0, 1e-14);
  // Singular vectors are defined up to a joint sign.
  EXPECT_NEAR(std::abs(f.U(0, 0)), 1.0, 1e-14);
  EXPECT_NEAR(f.U(0, 0) * f.V(0, 0), 1.0, 1e-14);
  EXPECT_NEAR(f.U.col(0).tail(2).norm(), 0.0, 1e-14);
}

TEST(ReducedSvd, Identity) {
  const SvdFactors f = reduced_svd(Matrix::Identity(3, 3));
  ASSERT_EQ(f.rank(), 3);
  for (Index k = 0; k < 3; ++k) EXPECT_NEAR(f.sigma(k), 1.0, 1e-14);
  EXPECT_LE((f.U * f.V.transpose() - Matrix::Identity(3, 3)).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(ReducedSvd, SeededRankTwoProduct) {
  Rng rng(7);
  const Matrix x1 = test::gaussian(8, 2, rng);
  const Matrix x2 = test::gaussian(8, 2, rng);
  const Matrix m = x1 * x2.transpose();
  const SvdFactors f = reduced_svd(m);
  ASSERT_EQ(f.rank(), 2);
  EXPECT_LE((f.reconstruct() - m).norm(), 1e-10 * m.norm());
  EXPECT_LE((f.U.transpose() * f.U - Matrix::Identity(2, 2)).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_LE((f.V.transpose() * f.V - Matrix::Identity(2, 2)).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_GE(f.sigma(0), f.sigma(1));
  EXPECT_GT(f.sigma(1), 0.0);
}

TEST(ReducedSvd, Errors) {
  EXPECT_THROW(reduced_svd(Matrix::Zero(4, 4)), Error);
  Matrix bad = Matrix::Identity(2, 2);
  bad(0, 1) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(reduced_svd(bad), Error);
}

TEST(ReducedSvd, RandomFactorInvariants) {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix m = test::gaussian(12, 3, rng) * test::gaussian(9, 3, rng).transpose();
    const SvdFactors f = reduced_svd(m);
    ASSERT_EQ(f.rank(), 3);
    EXPECT_LE((f.reconstruct() - m).norm() / m.norm(), 1e-8);
    for (Index k = 1; k < f.rank(); ++k) EXPECT_GE(f.sigma(k - 1), f.sigma(k));
  }
}

class TangentProjection : public ::testing::Test {
 protected:
  void SetUp() override {
    Rng rng(3);
    f_ = test::random_factors(8, 8, 2, rng);
  }
  SvdFactors f_;
};

TEST_F(TangentProjection, UVIsInTangentSpace) {
  const Matrix uv = f_.uv();
  EXPECT_LE((project_T(f_, uv) - uv).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_LE(project_T_perp(f_, uv).cwiseAbs().maxCoeff(), 1e-14);
}

TEST_F(TangentProjection, OrthogonalComplementIsAnnihilated) {
  Rng rng(5);
  const Matrix pu = Matrix::Identity(8, 8) - f_.U * f_.U.transpose();
  const Matrix pv = Matrix::Identity(8, 8) - f_.V * f_.V.transpose();
  const Matrix z = pu * test::gaussian(8, 8, rng) * pv;
  EXPECT_LE(project_T(f_, z).cwiseAbs().maxCoeff(), 1e-13);
  EXPECT_LE((project_T_perp(f_, z) - z).cwiseAbs().maxCoeff(), 1e-13);
}

TEST_F(TangentProjection, ZeroMapsToZero) {
  EXPECT_EQ(project_T_perp(f_, Matrix::Zero(8, 8)).cwiseAbs().maxCoeff(), 0.0);
}

TEST_F(TangentProjection, IdempotentAndComplementary) {
  Rng rng(9);
  const Matrix z = test::gaussian(8, 8, rng);
  const Matrix pz = project_T(f_, z);
  EXPECT_LE((project_T(f_, pz) - pz).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LE((pz + project_T_perp(f_, z) - z).cwiseAbs().maxCoeff(), 1e-12);
}

TEST_F(TangentProjection, MatchesDenseDefinition) {
  // Oracle: the unfactored formula with explicit projectors.
  Rng rng(10);
  const Matrix z = test::gaussian(8, 8, rng);
  const Matrix uu = f_.U * f_.U.transpose();
  const Matrix vv = f_.V * f_.V.transpose();
  const Matrix expected = uu * z + z * vv - uu * z * vv;
  EXPECT_LE((project_T(f_, z) - expected).cwiseAbs().maxCoeff(), 1e-13);
  const Matrix i8 = Matrix::Identity(8, 8);
  EXPECT_LE((project_T_perp(f_, z) - (i8 - uu) * z * (i8 - vv)).cwiseAbs().maxCoeff(), 1e-13);
}

TEST_F(TangentProjection, DimensionMismatch) {
  EXPECT_THROW(project_T(f_, Matrix::Zero(7, 8)), Error);
  EXPECT_THROW(project_T_perp(f_, Matrix::Zero(8, 9)), Error);
}

// Property sweep over seeded inputs of varying shape and rank.
TEST(TangentProjectionProperties, AlgebraOnSeededInputs) {
  Rng rng(2024);
  for (int trial = 0; trial < 100; ++trial) {
    const Index n1 = 5 + trial % 7;
    const Index n2 = 4 + (trial * 3) % 9;
    const Index r = 1 + trial % 3;
    const SvdFactors f = test::random_factors(n1, n2, r, rng);
    const Matrix z1 = test::gaussian(n1, n2, rng);
    const Matrix z2 = test::gaussian(n1, n2, rng);
    const Matrix p1 = project_T(f, z1);
    EXPECT_NEAR(inner(p1, z2), inner(z1, project_T(f, z2)), 1e-10);
    EXPECT_LE((project_T(f, p1) - p1).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_LE(project_T_perp(f, p1).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_LE((p1 + project_T_perp(f, z1) - z1).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(IndexMask, ConstructionAndSetAlgebra) {
  const IndexMask a = IndexMask::from_pairs(3, 3, {{0, 0}, {1, 2}, {2, 1}});
  const IndexMask b = IndexMask::from_pairs(3, 3, {{1, 2}, {2, 2}});
  EXPECT_EQ(a.size(), 3);
  EXPECT_EQ((a | b).size(), 4);
  EXPECT_EQ((a & b).size(), 1);
  EXPECT_EQ((a - b).size(), 2);
  EXPECT_TRUE((a & b).is_subset_of(a));
  EXPECT_EQ(a.complement().size(), 6);
  const auto members = a.members();
  ASSERT_EQ(members.size(), 3u);
  EXPECT_EQ(members[1], (std::pair<Index, Index>{1, 2}));
}

TEST(IndexMask, RejectsOutOfRangeAndDuplicates) {
  EXPECT_THROW(IndexMask::from_pairs(2, 2, {{2, 0}}), Error);
  EXPECT_THROW(IndexMask::from_pairs(2, 2, {{0, -1}}), Error);
  EXPECT_THROW(IndexMask::from_pairs(2, 2, {{1, 1}, {1, 1}}), Error);
  EXPECT_THROW(IndexMask(0, 3), Error);
}

TEST(ProjectMask, FullEmptyAndDiagonal) {
  Rng rng(1);
  const Matrix z = test::gaussian(4, 4, rng);
  EXPECT_EQ(project_mask(IndexMask::full(4, 4), z), z);
  EXPECT_EQ(project_mask(IndexMask(4, 4), z), Matrix::Zero(4, 4));
  const IndexMask diag = IndexMask::from_pairs(4, 4, {{0, 0}, {1, 1}, {2, 2}, {3, 3}});
  const Matrix d = project_mask(diag, z);
  for (Index i = 0; i < 4; ++i)
    for (Index j = 0; j < 4; ++j) EXPECT_EQ(d(i, j), i == j ? z(i, j) : 0.0);
  EXPECT_THROW(project_mask(diag, Matrix::Zero(3, 4)), Error);
}

TEST(ProjectMask, IdempotentAndLinear) {
  Rng rng(77);
  for (int trial = 0; trial < 25; ++trial) {
    const IndexMask m = test::random_mask(6, 7, 0.4, rng);
    const Matrix z1 = test::gaussian(6, 7, rng);
    const Matrix z2 = test::gaussian(6, 7, rng);
    const double a = 1.5, b = -0.25;
    const Matrix once = project_mask(m, z1);
    EXPECT_EQ(project_mask(m, once), once);
    const Matrix lhs = project_mask(m, (a * z1 + b * z2).eval());
    const Matrix rhs = a * project_mask(m, z1) + b * project_mask(m, z2);
    EXPECT_EQ(lhs, rhs);
  }
}

TEST(OperatorNorm, Identity) {
  const NormEstimate e = operator_norm([](const Matrix& x) { return x; }, 6, 5, 50, 1e-12);
  EXPECT_TRUE(e.converged);
  EXPECT_NEAR(e.value, 1.0, 1e-10);
}

TEST(OperatorNorm, ProjectionAndScaledProjection) {
  Rng rng(8);
  const SvdFactors f = test::random_factors(8, 8, 2, rng);
  const NormEstimate p = operator_norm([&](const Matrix& x) { return project_T(f, x); }, 8, 8, 100, 1e-12);
  EXPECT_TRUE(p.converged);
  EXPECT_NEAR(p.value, 1.0, 1e-8);
  const NormEstimate p2 =
      operator_norm([&](const Matrix& x) { return (2.0 * project_T(f, x)).eval(); }, 8, 8, 100, 1e-12);
  EXPECT_NEAR(p2.value, 2.0, 1e-8);
}

TEST(OperatorNorm, ReportsUnconverged) {
  // Diagonal map with two close eigenvalues converges slowly.
  Matrix scale = Matrix::Ones(10, 10);
  scale(0, 0) = 1.001;
  const NormEstimate e = operator_norm(
      [&](const Matrix& x) { return scale.cwiseProduct(x).eval(); }, 10, 10, 2, 1e-15);
  EXPECT_FALSE(e.converged);
  EXPECT_EQ(e.iterations, 2);
  EXPECT_GT(e.value, 0.9);
}

TEST(SpectralNorm, ExactAndPowerIterationAgree) {
  Rng rng(12);
  const Matrix a = test::gaussian(30, 20, rng);
  const double exact = spectral_norm(a);
  const double power = spectral_norm(a, /*max_exact_dim=*/10, 1e-10);
  EXPECT_NEAR(exact, power, 1e-6 * exact);
}

}  // namespace
}  // namespace lrmc
