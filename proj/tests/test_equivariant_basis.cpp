#include <gtest/gtest.h>

#include <Eigen/Dense>

#include "equiscalar/equivariant_basis.hpp"
#include "test_support.hpp"

using namespace equiscalar;
using equiscalar::testing::random_tuple;
using equiscalar::testing::random_vec;

namespace {

EquivariantModel model(GroupFamily f, std::size_t dim, CoefficientFn c) {
  const bool lorentzian = f == GroupFamily::Lorentz || f == GroupFamily::Poincare;
  return {f, lorentzian ? Metric::minkowski(dim) : Metric::euclidean(dim), std::move(c)};
}

double rel(const Vec& a, const Vec& b) { return (a - b).norm() / (1.0 + b.norm()); }

// det(v_1..v_{d-1}, y) computed by Eigen, independent of the library's cofactor code.
double eigen_det_with(const std::vector<Vec>& vs, const Vec& y) {
  const std::size_t d = y.dim();
  Eigen::MatrixXd m(d, d);
  for (std::size_t c = 0; c + 1 < d; ++c)
    for (std::size_t r = 0; r < d; ++r) m(r, c) = vs[c][r];
  for (std::size_t r = 0; r < d; ++r) m(r, d - 1) = y[r];
  return m.determinant();
}

}  // namespace

TEST(GeneralizedCross, RightHandedBasis) {
  EXPECT_EQ(generalized_cross({Vec{1, 0, 0}, Vec{0, 1, 0}}), (Vec{0, 0, 1}));
}

TEST(GeneralizedCross, PlanarIsQuarterTurn) {
  EXPECT_EQ(generalized_cross({Vec{2, 3}}), (Vec{-3, 2}));
}

TEST(GeneralizedCross, DependentInputsGiveZero) {
  EXPECT_LE(generalized_cross({Vec{1, 2, 3}, Vec{2, 4, 6}}).max_abs(), 1e-15);
}

TEST(GeneralizedCross, MatchesDefiningIdentity) {
  RngState rng(1);
  for (std::size_t d = 2; d <= 6; ++d)
    for (int trial = 0; trial < 50; ++trial) {
      std::vector<Vec> vs;
      for (std::size_t i = 0; i + 1 < d; ++i) vs.push_back(random_vec(rng, d));
      const Vec y = random_vec(rng, d);
      const double expect = eigen_det_with(vs, y);
      EXPECT_NEAR(generalized_cross(vs).dot(y), expect, 1e-10 * (1.0 + std::abs(expect)));
    }
}

TEST(GeneralizedCross, WrongShapes) {
  EXPECT_THROW(generalized_cross({Vec{1, 0, 0}}), Error);
  EXPECT_THROW(generalized_cross({}), Error);
}

TEST(Evaluate, SelectFirstReturnsFirstVectorForEveryFamily) {
  RngState rng(2);
  const std::vector<Role> roles{Role::Position, Role::Free, Role::Position};
  for (GroupFamily f : {GroupFamily::Orthogonal, GroupFamily::Rotation, GroupFamily::Euclidean,
                        GroupFamily::Lorentz, GroupFamily::Poincare}) {
    const VectorTuple x = random_tuple(rng, 3, 4, roles);
    const Vec h = evaluate(model(f, 4, fixtures::select_first()), x);
    EXPECT_LE((h - x[0]).max_abs(), 1e-12) << to_string(f);
  }
}

TEST(Evaluate, UniformUnderPoincareIsCentroidAndTranslates) {
  RngState rng(3);
  const VectorTuple x = random_tuple(rng, 4, 4, std::vector<Role>(4, Role::Position));
  const EquivariantModel m = model(GroupFamily::Poincare, 4, fixtures::uniform());
  VecAccumulator c(4);
  for (const Vec& v : x.vectors()) c.add(0.25, v);
  EXPECT_LE((evaluate(m, x) - c.value()).max_abs(), 1e-12);
  const Vec w{1, -2, 0.5, 3};
  EXPECT_LE((evaluate(m, apply(GroupElement::translation(w), x)) - (c.value() + w)).max_abs(), 1e-12);
}

TEST(Evaluate, CrossOfTwoInThreeDimensions) {
  RngState rng(4);
  const EquivariantModel m = model(GroupFamily::Rotation, 3, fixtures::cross_only());
  for (int trial = 0; trial < 100; ++trial) {
    const VectorTuple x = random_tuple(rng, 2, 3);
    const Vec h = evaluate(m, x);
    EXPECT_LE((h - generalized_cross({x[0], x[1]})).max_abs(), 1e-12);
    const GroupElement rot = sample_rotation(rng, 3);
    EXPECT_LE(rel(evaluate(m, apply(rot, x)), *rot.linear_part() * h), 1e-9);
    Mat q = *sample_rotation(rng, 3).linear_part();
    q = matmul(q, Mat::diagonal(std::vector<double>{-1, 1, 1}));
    EXPECT_LE(rel(evaluate(m, apply(GroupElement::orthogonal(q), x)), -1.0 * (q * h)), 1e-9);
  }
}

TEST(Evaluate, CrossTermLeavesTheSpan) {
  const VectorTuple x({Vec{1, 0, 0}, Vec{0, 1, 0}});
  const Vec h = evaluate(model(GroupFamily::Rotation, 3, fixtures::cross_only()), x);
  EXPECT_NEAR(span_check(x, h), 1.0, 1e-12);
}

TEST(Evaluate, Errors) {
  const VectorTuple free3({Vec{1, 0, 0}, Vec{0, 1, 0}});
  EXPECT_THROW(evaluate(model(GroupFamily::Euclidean, 3, fixtures::uniform()), free3), Error);
  EXPECT_THROW(evaluate(model(GroupFamily::Rotation, 4, fixtures::cross_only()),
                        VectorTuple({Vec{1, 0, 0, 0}, Vec{0, 1, 0, 0}})),
               Error);
  EXPECT_THROW(evaluate(model(GroupFamily::Orthogonal, 3, fixtures::cross_only()), free3), Error);
  EXPECT_THROW(evaluate(model(GroupFamily::Orthogonal, 4, fixtures::uniform()), free3), Error);
  EquivariantModel bad = model(GroupFamily::Lorentz, 3, fixtures::uniform());
  bad.metric = Metric::euclidean(3);
  EXPECT_THROW(evaluate(bad, free3), Error);
}

TEST(SymmetrizePermutation, SlotIndexAveragesToMean) {
  RngState rng(5);
  for (std::size_t n = 1; n <= 6; ++n) {
    const VectorTuple x = random_tuple(rng, n, 3);
    const Coefficients c =
        symmetrize_permutation(fixtures::slot_index())(compute_features(Metric::euclidean(3), x));
    for (double v : c.vector) EXPECT_NEAR(v, (static_cast<double>(n) + 1.0) / 2.0, 1e-12);
  }
}

TEST(SymmetrizePermutation, SymmetricInputIsAFixedPoint) {
  RngState rng(6);
  const VectorTuple x = random_tuple(rng, 5, 3);
  const EquivariantModel plain = model(GroupFamily::Orthogonal, 3, fixtures::uniform());
  const EquivariantModel sym = model(GroupFamily::Orthogonal, 3, symmetrize_permutation(fixtures::uniform()));
  EXPECT_LE((evaluate(plain, x) - evaluate(sym, x)).max_abs(), 1e-12);
}

TEST(SymmetrizePermutation, OutputUnchangedByInputPermutations) {
  RngState rng(7);
  for (GroupFamily f : {GroupFamily::Orthogonal, GroupFamily::Rotation, GroupFamily::Lorentz}) {
    const CoefficientFn base = f == GroupFamily::Rotation ? fixtures::gram_cross() : fixtures::gram_mix();
    const EquivariantModel m = model(f, 3, symmetrize_permutation(base));
    const VectorTuple x = random_tuple(rng, 5, 3);
    const Vec h = evaluate(m, x);
    for (int trial = 0; trial < 100; ++trial) {
      const VectorTuple y = apply(sample_permutation(rng, 5), x);
      EXPECT_LE(rel(evaluate(m, y), h), 1e-12) << to_string(f);
    }
  }
}

TEST(SymmetrizePermutation, RejectsLargeTuples) {
  RngState rng(8);
  const EquivariantModel m = model(GroupFamily::Orthogonal, 2, symmetrize_permutation(fixtures::gram_mix()));
  try {
    (void)evaluate(m, random_tuple(rng, 9, 2));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Unsupported);
    EXPECT_NE(std::string(e.what()).find("pooled"), std::string::npos);
  }
}

TEST(PooledCoefficients, PermutationInvariantForLargeN) {
  RngState rng(9);
  const EquivariantModel m = model(
      GroupFamily::Orthogonal, 3,
      pooled_coefficients("pooled", [](double s, double w, double a) { return std::tanh(s) + 0.1 * w - 0.01 * a; }));
  const VectorTuple x = random_tuple(rng, 12, 3);
  const Vec h = evaluate(m, x);
  for (int trial = 0; trial < 20; ++trial)
    EXPECT_LE(rel(evaluate(m, apply(sample_permutation(rng, 12), x)), h), 1e-12);
}

TEST(SpanCheck, Examples) {
  RngState rng(10);
  const VectorTuple x = random_tuple(rng, 2, 5);
  EXPECT_LE(span_check(x, x[0] + 2.0 * x[1]), 1e-10);
  EXPECT_EQ(span_check(VectorTuple::empty(3), Vec::zeros(3)), 0.0);
}

TEST(EquivarianceProperty, OrthogonalForEveryVectorFixture) {
  RngState rng(11);
  for (const std::string& id : {"select_first", "uniform", "slot_index", "gram_mix", "symmetrized(gram_mix)"}) {
    const int trials = id.rfind("symmetrized", 0) == 0 ? 100 : 1000;
    for (int trial = 0; trial < trials; ++trial) {
      const std::size_t d = 2 + rng.index(5);
      const std::size_t n = 1 + rng.index(id.rfind("symmetrized", 0) == 0 ? 5 : 8);
      const EquivariantModel m = model(GroupFamily::Orthogonal, d, fixtures::lookup(id));
      const VectorTuple x = random_tuple(rng, n, d);
      const GroupElement q = sample_orthogonal(rng, d);
      EXPECT_LE(rel(evaluate(m, apply(q, x)), *q.linear_part() * evaluate(m, x)), 1e-9) << id;
    }
  }
}

TEST(EquivarianceProperty, RotationWithCrossTerms) {
  RngState rng(12);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t d = 2 + rng.index(3);
    const std::size_t n = d - 1 + rng.index(4);
    const EquivariantModel m = model(GroupFamily::Rotation, d, fixtures::gram_cross());
    const VectorTuple x = random_tuple(rng, n, d);
    const GroupElement q = sample_rotation(rng, d);
    EXPECT_LE(rel(evaluate(m, apply(q, x)), *q.linear_part() * evaluate(m, x)), 1e-9);
  }
}

TEST(EquivarianceProperty, PureCrossPicksUpDeterminantSign) {
  RngState rng(13);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t d = 2 + rng.index(4);
    const EquivariantModel m = model(GroupFamily::Rotation, d, fixtures::cross_only());
    const VectorTuple x = random_tuple(rng, d - 1 + rng.index(3), d);
    const GroupElement q = sample_orthogonal(rng, d);
    EXPECT_LE(rel(evaluate(m, apply(q, x)), q.orientation() * (*q.linear_part() * evaluate(m, x))), 1e-9);
  }
}

TEST(EquivarianceProperty, EuclideanModes) {
  RngState rng(14);
  const std::vector<Role> roles{Role::Position, Role::Free, Role::Position, Role::Position, Role::Free};
  for (int trial = 0; trial < 300; ++trial) {
    const VectorTuple x = random_tuple(rng, 5, 3, roles);
    const Vec w = random_vec(rng, 3, 3.0);
    const VectorTuple shifted = apply(GroupElement::translation(w), x);

    EquivariantModel inv = model(GroupFamily::Euclidean, 3, fixtures::gram_mix());
    inv.mode = TranslationMode::Invariant;
    EXPECT_LE(rel(evaluate(inv, shifted), evaluate(inv, x)), 1e-9);

    const EquivariantModel eq = model(GroupFamily::Euclidean, 3, fixtures::gram_mix());
    EXPECT_LE(rel(evaluate(eq, shifted), evaluate(eq, x) + w), 1e-9);

    const GroupElement g = sample_euclidean(rng, 3);
    const Vec h = evaluate(eq, x);
    EXPECT_LE(rel(evaluate(eq, apply(g, x)), *g.linear_part() * h + *g.translation_part()), 1e-9);
  }
}

TEST(EquivarianceProperty, LorentzAndPoincare) {
  RngState rng(15);
  const std::vector<Role> roles{Role::Position, Role::Position, Role::Free, Role::Position};
  for (int trial = 0; trial < 300; ++trial) {
    const VectorTuple x = random_tuple(rng, 4, 4, roles);
    const EquivariantModel lor = model(GroupFamily::Lorentz, 4, fixtures::gram_mix());
    const GroupElement l = sample_lorentz(rng, 4);
    EXPECT_LE(rel(evaluate(lor, apply(l, x)), *l.linear_part() * evaluate(lor, x)), 1e-8);

    const EquivariantModel poi = model(GroupFamily::Poincare, 4, fixtures::gram_mix());
    const GroupElement p = sample_poincare(rng, 4);
    const Evaluation e = evaluate_detailed(poi, x);
    double sum = 0.0;
    for (std::size_t i : x.position_indices()) sum += e.coefficients.vector[i];
    EXPECT_NEAR(sum, 1.0, 1e-12);
    EXPECT_LE(rel(evaluate(poi, apply(p, x)), *p.linear_part() * e.value + *p.translation_part()), 1e-8);
  }
}

TEST(EquivarianceProperty, SymmetrizedJointlyWithEuclideanMotion) {
  RngState rng(16);
  const EquivariantModel m = model(GroupFamily::Euclidean, 3, symmetrize_permutation(fixtures::gram_mix()));
  for (int trial = 0; trial < 50; ++trial) {
    const VectorTuple x = random_tuple(rng, 4, 3, std::vector<Role>(4, Role::Position));
    const GroupElement p = sample_permutation(rng, 4);
    const GroupElement g = sample_euclidean(rng, 3);
    const Vec expected = *g.linear_part() * evaluate(m, x) + *g.translation_part();
    EXPECT_LE(rel(evaluate(m, apply(g, apply(p, x))), expected), 1e-9);
  }
}
