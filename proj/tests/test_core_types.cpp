#include <gtest/gtest.h>

#include <limits>

#include "equiscalar/core_types.hpp"
#include "equiscalar/group_actions.hpp"
#include "test_support.hpp"

using namespace equiscalar;
using equiscalar::testing::random_vec;

TEST(CoreTypes, EuclideanInnerOfOrthogonalBasisIsZero) {
  EXPECT_EQ(inner(Metric::euclidean(2), Vec{1, 0}, Vec{0, 1}), 0.0);
}

TEST(CoreTypes, MinkowskiTimelikeAndLightlike) {
  const Metric m = Metric::minkowski(4);
  EXPECT_EQ(inner(m, Vec{1, 0, 0, 0}, Vec{1, 0, 0, 0}), 1.0);
  EXPECT_EQ(inner(m, Vec{1, 1, 0, 0}, Vec{1, 1, 0, 0}), 0.0);
}

TEST(CoreTypes, MinkowskiSignatureMatrix) {
  const Mat lambda = signature_matrix(Metric::minkowski(4));
  EXPECT_EQ(lambda, Mat::diagonal(std::vector<double>{1, -1, -1, -1}));
}

TEST(CoreTypes, InnerDimensionMismatchNamesBothDimensions) {
  try {
    (void)inner(Metric::euclidean(3), Vec{1, 0, 0}, Vec{1, 0});
    FAIL() << "expected DimensionError";
  } catch (const DimensionError& e) {
    EXPECT_EQ(e.expected(), 3u);
    EXPECT_EQ(e.actual(), 2u);
    EXPECT_EQ(e.code(), ErrorCode::DimensionMismatch);
  }
}

TEST(CoreTypes, NonFiniteRejectedAtConstruction) {
  EXPECT_THROW(Vec({1.0, std::numeric_limits<double>::quiet_NaN()}), Error);
  EXPECT_THROW(Vec({std::numeric_limits<double>::infinity()}), Error);
  EXPECT_THROW(Mat(1, 1, {std::numeric_limits<double>::infinity()}), Error);
  EXPECT_THROW(Vec(std::vector<double>{}), Error);
}

TEST(CoreTypes, MatrixShapeErrors) {
  EXPECT_THROW(Mat(2, 2, {1, 2, 3}), Error);
  EXPECT_THROW(matmul(Mat::identity(2), Mat::identity(3)), Error);
  EXPECT_THROW(determinant(Mat::zeros(2, 3)), Error);
}

TEST(CoreTypes, DeterminantExamples) {
  EXPECT_EQ(determinant(Mat::identity(3)), 1.0);
  EXPECT_EQ(determinant(Mat::from_rows({{0, 1}, {1, 0}})), -1.0);
  EXPECT_NEAR(determinant(Mat::from_rows({{2, 1, 0}, {1, 3, 1}, {0, 1, 4}})), 18.0, 1e-12);
}

TEST(CoreTypes, TransposeIsAnInvolution) {
  const Mat a = Mat::from_rows({{1, 2, 3}, {4, 5, 6}});
  EXPECT_EQ(transpose(transpose(a)), a);
  EXPECT_EQ(transpose(a)(2, 1), 6.0);
}

TEST(CoreTypes, TupleRejectsMixedDimensionsAndRoleMismatch) {
  EXPECT_THROW(VectorTuple({Vec{1, 0}, Vec{1, 0, 0}}), Error);
  EXPECT_THROW(VectorTuple({Vec{1, 0}}, {Role::Free, Role::Position}), Error);
  const VectorTuple t({Vec{1, 0}, Vec{0, 1}}, {Role::Position, Role::Free});
  EXPECT_EQ(t.position_indices(), std::vector<std::size_t>{0});
}

TEST(CoreTypesProperty, InnerIsExactlySymmetric) {
  RngState rng(11);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t d = 2 + rng.index(7);
    const Vec a = random_vec(rng, d), b = random_vec(rng, d);
    EXPECT_EQ(inner(Metric::euclidean(d), a, b), inner(Metric::euclidean(d), b, a));
    EXPECT_EQ(inner(Metric::minkowski(d), a, b), inner(Metric::minkowski(d), b, a));
  }
}

TEST(CoreTypesProperty, OrthogonalMapsPreserveEuclideanInner) {
  RngState rng(12);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t d = 2 + rng.index(7);
    const Mat q = *sample_orthogonal(rng, d).linear_part();
    ASSERT_LE(orthogonality_defect(q), 1e-12);
    const Vec a = random_vec(rng, d), b = random_vec(rng, d);
    const Metric m = Metric::euclidean(d);
    const double before = inner(m, a, b);
    EXPECT_LE(std::abs(inner(m, q * a, q * b) - before), 1e-9 * (1.0 + std::abs(before)));
  }
}

TEST(CoreTypesProperty, LorentzMapsPreserveMinkowskiInner) {
  RngState rng(13);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t d1 = 2 + rng.index(4);
    const Mat l = *sample_lorentz(rng, d1).linear_part();
    ASSERT_LE(lorentz_defect(l), 1e-9);
    const Vec a = random_vec(rng, d1), b = random_vec(rng, d1);
    const Metric m = Metric::minkowski(d1);
    const double before = inner(m, a, b);
    EXPECT_LE(std::abs(inner(m, l * a, l * b) - before), 1e-9 * (1.0 + std::abs(before)));
  }
}
