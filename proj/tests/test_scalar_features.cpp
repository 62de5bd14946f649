#include <gtest/gtest.h>

#include <Eigen/Dense>

#include "equiscalar/group_actions.hpp"
#include "equiscalar/scalar_features.hpp"
#include "test_support.hpp"

using namespace equiscalar;
using equiscalar::testing::random_tuple;
using equiscalar::testing::random_vec;

namespace {

// Least-squares residual of v against span(basis); independent of the library.
double projection_residual(const std::vector<Vec>& basis, const Vec& v) {
  Eigen::MatrixXd a(v.dim(), basis.size());
  for (std::size_t j = 0; j < basis.size(); ++j)
    for (std::size_t i = 0; i < v.dim(); ++i) a(i, j) = basis[j][i];
  Eigen::VectorXd b(v.dim());
  for (std::size_t i = 0; i < v.dim(); ++i) b(i) = v[i];
  const Eigen::VectorXd coef = a.completeOrthogonalDecomposition().solve(b);
  return (a * coef - b).norm();
}

Mat frozen_gram_of(const VectorTuple& x) { return gram(Metric::euclidean(x.dim()), x); }

}  // namespace

TEST(Gram, OrthonormalPairGivesIdentity) {
  EXPECT_EQ(gram(Metric::euclidean(2), VectorTuple({Vec{1, 0}, Vec{0, 1}})), Mat::identity(2));
}

TEST(Gram, SingleVector) {
  const Vec v{1, 2, 3, 4};
  EXPECT_EQ(gram(Metric::euclidean(4), VectorTuple({v})), Mat(1, 1, {30.0}));
  EXPECT_EQ(gram(Metric::minkowski(4), VectorTuple({v})), Mat(1, 1, {1.0 - 4 - 9 - 16}));
}

TEST(Gram, MinkowskiHandEvaluation) {
  const Mat m = gram(Metric::minkowski(4), VectorTuple({Vec{1, 0, 0, 0}, Vec{0, 1, 0, 0}}));
  EXPECT_EQ(m, Mat::from_rows({{1, 0}, {0, -1}}));
}

TEST(Gram, ExactlySymmetric) {
  RngState rng(1);
  const Mat m = gram(Metric::minkowski(5), random_tuple(rng, 9, 5));
  EXPECT_EQ(m, transpose(m));
}

TEST(Subdeterminants, IdentityHasUnitDeterminant) {
  const auto s = subdeterminants(VectorTuple({Vec{1, 0, 0}, Vec{0, 1, 0}, Vec{0, 0, 1}}));
  ASSERT_EQ(s.size(), 1u);
  EXPECT_EQ(s[0].indices, (std::vector<std::size_t>{0, 1, 2}));
  EXPECT_EQ(s[0].value, 1.0);
}

TEST(Subdeterminants, HandEvaluatedPlanarExample) {
  const auto s = subdeterminants(VectorTuple({Vec{1, 0}, Vec{1, 1}, Vec{0, 2}}));
  ASSERT_EQ(s.size(), 3u);
  EXPECT_EQ(s[0].indices, (std::vector<std::size_t>{0, 1}));
  EXPECT_DOUBLE_EQ(s[0].value, 1.0);
  EXPECT_EQ(s[1].indices, (std::vector<std::size_t>{0, 2}));
  EXPECT_DOUBLE_EQ(s[1].value, 2.0);
  EXPECT_EQ(s[2].indices, (std::vector<std::size_t>{1, 2}));
  EXPECT_DOUBLE_EQ(s[2].value, 2.0);
}

TEST(Subdeterminants, SwappingVectorsNegatesAffectedEntries) {
  RngState rng(2);
  const VectorTuple x = random_tuple(rng, 4, 3);
  const VectorTuple y = apply(GroupElement::permutation({1, 0, 2, 3}), x);
  const auto sx = subdeterminants(x), sy = subdeterminants(y);
  for (std::size_t k = 0; k < sx.size(); ++k) {
    const auto& idx = sx[k].indices;
    const bool has0 = std::find(idx.begin(), idx.end(), 0) != idx.end();
    const bool has1 = std::find(idx.begin(), idx.end(), 1) != idx.end();
    if (has0 && has1) {
      EXPECT_NEAR(sy[k].value, -sx[k].value, 1e-12);
    }
  }
}

TEST(Subdeterminants, TooFewVectors) {
  EXPECT_THROW(subdeterminants(VectorTuple({Vec{1, 0, 0}, Vec{0, 1, 0}})), Error);
}

TEST(Combinations, LexicographicOrder) {
  const auto c = combinations(4, 2);
  const std::vector<std::vector<std::size_t>> expected{{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}};
  EXPECT_EQ(c, expected);
}

TEST(TranslationReduce, FirstPositionPair) {
  const Vec r1{1, 2, 3}, r2{4, 0, -1};
  const VectorTuple out = translation_reduce(VectorTuple({r1, r2}, {Role::Position, Role::Position}));
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0], r2 - r1);
  EXPECT_EQ(out.role(0), Role::Free);
}

TEST(TranslationReduce, InvariantUnderTranslation) {
  RngState rng(3);
  const std::vector<Role> roles{Role::Position, Role::Free, Role::Position, Role::Position};
  for (PivotRule pivot : {PivotRule::FirstPosition, PivotRule::CenterOfPositions}) {
    const VectorTuple x = random_tuple(rng, 4, 3, roles);
    const VectorTuple shifted = apply(sample_translation(rng, 3), x);
    EXPECT_LE(max_abs_diff(translation_reduce(shifted, pivot), translation_reduce(x, pivot)), 1e-12);
  }
}

TEST(TranslationReduce, CenteredPositionsSumToZero) {
  RngState rng(4);
  const VectorTuple x = random_tuple(rng, 3, 3, {Role::Position, Role::Position, Role::Position});
  const VectorTuple c = translation_reduce(x, PivotRule::CenterOfPositions);
  VecAccumulator acc(3);
  for (const Vec& v : c.vectors()) acc.add(1.0, v);
  EXPECT_LE(acc.value().max_abs(), 1e-12);
}

TEST(TranslationReduce, RequiresAPosition) {
  EXPECT_THROW(translation_reduce(VectorTuple({Vec{1, 2}})), Error);
}

TEST(OmegaSample, HandEnumeratedBand) {
  RngState rng(5);
  const Mat m = frozen_gram_of(random_tuple(rng, 4, 2));
  const OmegaSample s = omega_sample(m, 2);
  // 1-based listing of the n = 4, d = 2 band.
  const std::vector<std::pair<int, int>> expected{{1, 1}, {1, 2}, {1, 3}, {2, 2}, {2, 3}, {2, 4},
                                                  {3, 3}, {3, 4}, {3, 1}, {4, 4}, {4, 1}, {4, 2}};
  ASSERT_EQ(s.entries.size(), expected.size());
  for (std::size_t k = 0; k < expected.size(); ++k) {
    EXPECT_EQ(s.entries[k].row + 1, static_cast<std::size_t>(expected[k].first));
    EXPECT_EQ(s.entries[k].col + 1, static_cast<std::size_t>(expected[k].second));
    EXPECT_EQ(s.entries[k].value, m(s.entries[k].row, s.entries[k].col));
  }
}

TEST(OmegaSample, CountAndDiagonal) {
  RngState rng(6);
  for (std::size_t n = 2; n <= 9; ++n)
    for (std::size_t d = 0; d + 1 <= n; ++d) {
      const OmegaSample s = omega_sample(frozen_gram_of(random_tuple(rng, n, 3)), d);
      EXPECT_EQ(s.entries.size(), n * (d + 1));
      for (std::size_t i = 0; i < n; ++i) EXPECT_EQ(s.entries[i * (d + 1)].col, i);
    }
}

TEST(OmegaSample, TooSmallMatrix) {
  EXPECT_THROW(omega_sample(Mat::identity(3), 3), Error);
}

TEST(OmegaComplete, RecoversHeldOutEntriesOfRankDGram) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    RngState rng(1000 + seed);
    const Mat m = frozen_gram_of(random_tuple(rng, 10, 3));
    const CompletionResult r = omega_complete(omega_sample(m, 3));
    EXPECT_TRUE(r.converged) << "seed " << seed << " residual " << r.residual;
    EXPECT_LE(frobenius_norm(r.matrix - m) / frobenius_norm(m), 1e-6) << "seed " << seed;
  }
}

TEST(OmegaComplete, RankOneOuterProductIsExact) {
  RngState rng(7);
  const Vec v = random_vec(rng, 8);
  const Mat m = frozen_gram_of(VectorTuple({Vec{v[0]}, Vec{v[1]}, Vec{v[2]}, Vec{v[3]}, Vec{v[4]}, Vec{v[5]},
                                            Vec{v[6]}, Vec{v[7]}}));
  const CompletionResult r = omega_complete(omega_sample(m, 1));
  EXPECT_LE(max_abs_diff(r.matrix, m), 1e-8);
}

TEST(OmegaComplete, FullRankIdentityIsReportedAsFailure) {
  const CompletionResult r = omega_complete(omega_sample(Mat::identity(10), 3));
  EXPECT_FALSE(r.converged);
  EXPECT_GT(r.residual, 1e-6);
}

TEST(CholeskyReconstruct, IdentityGivesOrthonormalPair) {
  const VectorTuple x = cholesky_reconstruct(Mat::identity(2));
  EXPECT_LE(max_abs_diff(frozen_gram_of(x), Mat::identity(2)), 1e-15);
}

TEST(CholeskyReconstruct, RoundTripRandomPsd) {
  RngState rng(8);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + rng.index(12);
    const std::size_t d = 1 + rng.index(12);
    const Mat m = frozen_gram_of(random_tuple(rng, n, d));
    EXPECT_LE(max_abs_diff(frozen_gram_of(cholesky_reconstruct(m)), m), 1e-10);
  }
}

TEST(CholeskyReconstruct, RankDeficientFitsInRankDimensions) {
  RngState rng(9);
  const Mat m = frozen_gram_of(random_tuple(rng, 7, 2));
  const VectorTuple x = cholesky_reconstruct(m);
  ASSERT_EQ(x.dim(), 7u);
  for (const Vec& v : x.vectors())
    for (std::size_t i = 2; i < 7; ++i) EXPECT_EQ(v[i], 0.0);
  const VectorTuple tight = cholesky_reconstruct(m, 2);
  EXPECT_LE(max_abs_diff(frozen_gram_of(tight), m), 1e-10);
  EXPECT_THROW(cholesky_reconstruct(m, 1), Error);
}

TEST(CholeskyReconstruct, IndefiniteNamesEigenvalue) {
  try {
    (void)cholesky_reconstruct(Mat::from_rows({{1, 0}, {0, -2}}));
    FAIL();
  } catch (const IndefiniteMatrixError& e) {
    EXPECT_NEAR(e.min_eigenvalue(), -2.0, 1e-12);
  }
}

TEST(LorentzOrthogonalize, StandardBasisUnchanged) {
  RngState rng(10);
  const VectorTuple e({Vec{1, 0, 0, 0}, Vec{0, 1, 0, 0}, Vec{0, 0, 1, 0}, Vec{0, 0, 0, 1}});
  const LorentzBasis b = lorentz_orthogonalize(e, rng);
  EXPECT_EQ(b.restarts, 0u);
  EXPECT_EQ(b.basis, e);
}

TEST(LorentzOrthogonalize, OffDiagonalVanishesAndSpansNest) {
  RngState rng(11);
  const Metric m = Metric::minkowski(4);
  for (int trial = 0; trial < 100; ++trial) {
    const VectorTuple w = random_tuple(rng, 1 + rng.index(4), 4);
    const LorentzBasis b = lorentz_orthogonalize(w, rng);
    const Mat g = gram(m, b.basis);
    for (std::size_t i = 0; i < g.rows(); ++i)
      for (std::size_t j = 0; j < g.cols(); ++j)
        if (i != j) EXPECT_LE(std::abs(g(i, j)), 1e-9);
    if (b.restarts == 0) {
      for (std::size_t j = 0; j < w.size(); ++j) {
        const std::vector<Vec> prefix(w.vectors().begin(), w.vectors().begin() + static_cast<long>(j + 1));
        EXPECT_LT(projection_residual(prefix, b.basis[j]), 1e-9);
      }
    }
  }
}

TEST(LorentzOrthogonalize, LightlikeInputTriggersRestartAndKeepsSpan) {
  RngState rng(12);
  const VectorTuple w({Vec{1, 1, 0, 0}, Vec{0.3, 0.2, 1.0, 0.0}, Vec{0.1, 0.0, 0.4, 1.0}});
  const LorentzBasis b = lorentz_orthogonalize(w, rng);
  EXPECT_GE(b.restarts, 1u);
  const Metric m = Metric::minkowski(4);
  const Mat g = gram(m, b.basis);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_GT(std::abs(g(i, i)), 0.0);
    for (std::size_t j = 0; j < 3; ++j)
      if (i != j) EXPECT_LE(std::abs(g(i, j)), 1e-9);
    EXPECT_LT(projection_residual(w.vectors(), b.basis[i]), 1e-9);
  }
}

TEST(LorentzOrthogonalize, Errors) {
  RngState rng(13);
  EXPECT_THROW(lorentz_orthogonalize(VectorTuple({Vec{1, 1, 0, 0}}), rng), Error);
  EXPECT_THROW(lorentz_orthogonalize(VectorTuple({Vec{1, 0, 0, 0}, Vec{2, 0, 0, 0}}), rng), Error);
}

TEST(ScalarFeatureProperty, GramInvariantUnderOrthogonal) {
  RngState rng(14);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t d = 1 + rng.index(8), n = 1 + rng.index(12);
    const VectorTuple x = random_tuple(rng, n, d);
    const Mat before = frozen_gram_of(x);
    const Mat after = frozen_gram_of(apply(sample_orthogonal(rng, d), x));
    EXPECT_LE(max_abs_diff(before, after), 1e-9);
  }
}

TEST(ScalarFeatureProperty, SubdeterminantsUnderRotationsAndReflections) {
  RngState rng(15);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t d = 2 + rng.index(3);
    const VectorTuple x = random_tuple(rng, d + 2, d);
    const GroupElement q = sample_orthogonal(rng, d);
    const auto before = subdeterminants(x), after = subdeterminants(apply(q, x));
    const double sign = q.orientation() > 0 ? 1.0 : -1.0;
    for (std::size_t k = 0; k < before.size(); ++k)
      EXPECT_NEAR(after[k].value, sign * before[k].value, 1e-9 * (1.0 + std::abs(before[k].value)));
  }
}

TEST(ScalarFeatureProperty, MinkowskiGramInvariantUnderLorentz) {
  RngState rng(16);
  const Metric m = Metric::minkowski(4);
  for (int trial = 0; trial < 500; ++trial) {
    const VectorTuple x = random_tuple(rng, 6, 4);
    const Mat before = gram(m, x), after = gram(m, apply(sample_lorentz(rng, 4), x));
    for (std::size_t i = 0; i < before.entries().size(); ++i)
      EXPECT_LE(std::abs(after.entries()[i] - before.entries()[i]), 1e-8 * (1.0 + std::abs(before.entries()[i])));
  }
}
