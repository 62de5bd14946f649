#pragma once

// Equivariant vector functions written as invariant-scalar coefficients
// times input vectors, plus cross-product terms for SO(d), affine
// coefficient constraints for the translation families, and averaging over
// input permutations.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "equiscalar/core_types.hpp"
#include "equiscalar/detail/eigen_bridge.hpp"
#include "equiscalar/group_actions.hpp"
#include "equiscalar/scalar_features.hpp"

namespace equiscalar {

/// Generalised cross product of d-1 vectors in R^d: the unique x with
/// <x, y> = det(v_1, ..., v_{d-1}, y) for all y.
inline Vec generalized_cross(const std::vector<Vec>& vs) {
  if (vs.empty()) throw Error(ErrorCode::InvalidArgument, "generalized_cross needs d-1 >= 1 vectors");
  const std::size_t d = vs.size() + 1;
  for (const Vec& v : vs)
    if (v.dim() != d) throw DimensionError(d, v.dim(), "generalized_cross expects d-1 vectors in R^d");
  std::vector<double> out(d);
  std::vector<double> minor((d - 1) * (d - 1));
  for (std::size_t k = 0; k < d; ++k) {
    std::size_t r = 0;
    for (std::size_t row = 0; row < d; ++row) {
      if (row == k) continue;
      for (std::size_t c = 0; c + 1 < d; ++c) minor[r * (d - 1) + c] = vs[c][row];
      ++r;
    }
    // Cofactor of y_k in the last column of det(v_1..v_{d-1}, y).
    const double sign = ((k + d + 1) % 2 == 0) ? 1.0 : -1.0;
    out[k] = sign * determinant(Mat(d - 1, d - 1, minor));
  }
  return Vec(std::move(out));
}

/// Coefficients produced from invariant features. cross is indexed by the
/// (d-1)-subsets of the inputs in lexicographic order and may be empty.
struct Coefficients {
  std::vector<double> vector;
  std::vector<double> cross;
};

/// A coefficient function sees only scalar features, never raw vectors.
struct CoefficientFn {
  std::string id;
  std::function<Coefficients(const ScalarFeatureSet&)> fn;

  Coefficients operator()(const ScalarFeatureSet& f) const {
    if (!fn) throw Error(ErrorCode::InvalidArgument, "coefficient function '" + id + "' is empty");
    Coefficients c = fn(f);
    if (c.vector.size() != f.n()) {
      throw Error(ErrorCode::ShapeMismatch, "coefficient function '" + id + "' returned " +
                                                std::to_string(c.vector.size()) + " coefficients for n=" +
                                                std::to_string(f.n()));
    }
    detail::require_finite(c.vector, "coefficient");
    detail::require_finite(c.cross, "cross coefficient");
    return c;
  }
};

enum class TranslationMode { Invariant, Equivariant };

struct EquivariantModel {
  GroupFamily family = GroupFamily::Orthogonal;
  Metric metric;
  CoefficientFn coeffs;
  bool permutation_symmetric = false;
  TranslationMode mode = TranslationMode::Equivariant;  // Euclidean only; Poincare always sums to 1
};

struct Evaluation {
  Vec value;
  Coefficients coefficients;  // after any affine renormalisation
};

namespace detail {

inline void check_model(const EquivariantModel& model, const VectorTuple& x) {
  switch (model.family) {
    case GroupFamily::Orthogonal:
    case GroupFamily::Rotation:
    case GroupFamily::Euclidean:
      if (model.metric.is_minkowski()) throw Error(ErrorCode::InvalidArgument, std::string(to_string(model.family)) + " model needs a Euclidean metric");
      break;
    case GroupFamily::Lorentz:
    case GroupFamily::Poincare:
      if (!model.metric.is_minkowski()) throw Error(ErrorCode::InvalidArgument, std::string(to_string(model.family)) + " model needs a Minkowski metric");
      break;
    default:
      throw Error(ErrorCode::Unsupported, std::string("no equivariant model for family ") + to_string(model.family));
  }
  if (x.is_empty()) throw Error(ErrorCode::InvalidArgument, "evaluate needs at least one input vector");
  if (x.dim() != model.metric.dim) throw DimensionError(model.metric.dim, x.dim(), "evaluate");
  const bool translating = model.family == GroupFamily::Euclidean || model.family == GroupFamily::Poincare;
  if (translating && !x.has_positions()) {
    throw Error(ErrorCode::InvalidArgument, std::string(to_string(model.family)) +
                                                " model needs Position role tags to know which vectors translate");
  }
  if (model.family == GroupFamily::Rotation && x.size() + 1 < x.dim()) {
    throw Error(ErrorCode::InvalidArgument, "cross terms need n >= d-1 (n=" + std::to_string(x.size()) +
                                                ", d=" + std::to_string(x.dim()) + ")");
  }
}

inline ScalarFeatureSet model_features(const EquivariantModel& model, const VectorTuple& x) {
  const bool translating = model.family == GroupFamily::Euclidean || model.family == GroupFamily::Poincare;
  FeatureOptions opts;
  opts.subdets = model.family == GroupFamily::Rotation && x.size() >= x.dim();
  if (!translating) return compute_features(model.metric, x, opts);
  // Centering keeps one feature row per input, so coefficients still line up.
  const VectorTuple reduced(translation_reduce(x, PivotRule::CenterOfPositions).vectors(), x.roles());
  return compute_features(model.metric, reduced, opts);
}

/// Sorts idx ascending and returns the sign of the sorting permutation.
inline double sort_with_sign(std::vector<std::size_t>& idx) {
  double sign = 1.0;
  for (std::size_t i = 1; i < idx.size(); ++i)
    for (std::size_t j = i; j > 0 && idx[j - 1] > idx[j]; --j) {
      std::swap(idx[j - 1], idx[j]);
      sign = -sign;
    }
  return sign;
}

inline void renormalize(std::vector<double>& c, const std::vector<std::size_t>& positions, double target) {
  double sum = 0.0;
  for (std::size_t i : positions) sum += c[i];
  const double shift = (target - sum) / static_cast<double>(positions.size());
  for (std::size_t i : positions) c[i] += shift;
}

}  // namespace detail

inline Evaluation evaluate_detailed(const EquivariantModel& model, const VectorTuple& x) {
  detail::check_model(model, x);
  const ScalarFeatureSet features = detail::model_features(model, x);
  Coefficients c = model.coeffs(features);

  if (model.family == GroupFamily::Euclidean || model.family == GroupFamily::Poincare) {
    const bool invariant = model.family == GroupFamily::Euclidean && model.mode == TranslationMode::Invariant;
    detail::renormalize(c.vector, x.position_indices(), invariant ? 0.0 : 1.0);
  }

  VecAccumulator acc(x.dim());
  for (std::size_t t = 0; t < x.size(); ++t) acc.add(c.vector[t], x[t]);

  if (!c.cross.empty()) {
    if (model.family != GroupFamily::Rotation) {
      throw Error(ErrorCode::InvalidArgument, "cross coefficients are only meaningful for the rotation family");
    }
    const auto subsets = combinations(x.size(), x.dim() - 1);
    if (c.cross.size() != subsets.size()) {
      throw Error(ErrorCode::ShapeMismatch, "expected " + std::to_string(subsets.size()) +
                                                " cross coefficients, got " + std::to_string(c.cross.size()));
    }
    for (std::size_t s = 0; s < subsets.size(); ++s) {
      if (c.cross[s] == 0.0) continue;
      std::vector<Vec> vs;
      for (std::size_t i : subsets[s]) vs.push_back(x[i]);
      acc.add(c.cross[s], generalized_cross(vs));
    }
  }
  return {acc.value(), std::move(c)};
}

inline Vec evaluate(const EquivariantModel& model, const VectorTuple& x) { return evaluate_detailed(model, x).value; }

// ---------------------------------------------------------------------------
// Permutation symmetrisation
// ---------------------------------------------------------------------------

inline constexpr std::size_t kMaxExplicitAveraging = 8;

/// Features of the permuted tuple (sigma * x)_i = x_{sigma(i)}, derived from
/// the features of x. Omega samples are not permutation compatible and are
/// dropped.
inline ScalarFeatureSet permute_features(const ScalarFeatureSet& f, const std::vector<std::size_t>& sigma) {
  const std::size_t n = f.n();
  if (sigma.size() != n) throw DimensionError(n, sigma.size(), "permute_features");
  std::vector<double> g(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) g[i * n + j] = f.gram(sigma[i], sigma[j]);
  ScalarFeatureSet out{Mat(n, n, std::move(g)), f.metric, std::nullopt, std::nullopt, {}};
  if (!f.roles.empty()) {
    out.roles.resize(n);
    for (std::size_t i = 0; i < n; ++i) out.roles[i] = f.roles[sigma[i]];
  }
  if (f.subdets) {
    std::map<std::vector<std::size_t>, double> lookup;
    for (const auto& s : *f.subdets) lookup[s.indices] = s.value;
    std::vector<Subdeterminant> ps;
    ps.reserve(f.subdets->size());
    for (const auto& s : *f.subdets) {
      std::vector<std::size_t> image;
      for (std::size_t i : s.indices) image.push_back(sigma[i]);
      const double sign = detail::sort_with_sign(image);
      ps.push_back({s.indices, sign * lookup.at(image)});
    }
    out.subdets = std::move(ps);
  }
  return out;
}

/// Average a coefficient function over all n! reorderings of its inputs,
/// giving a model whose output is unchanged when the inputs are permuted.
inline CoefficientFn symmetrize_permutation(CoefficientFn base) {
  CoefficientFn out;
  out.id = "symmetrized(" + base.id + ")";
  out.fn = [base = std::move(base)](const ScalarFeatureSet& f) {
    const std::size_t n = f.n();
    if (n > kMaxExplicitAveraging) {
      throw Error(ErrorCode::Unsupported, "explicit permutation averaging is limited to n <= " +
                                              std::to_string(kMaxExplicitAveraging) + " (n=" + std::to_string(n) +
                                              "); build the coefficients with pooled_coefficients instead");
    }
    std::vector<std::size_t> sigma(n);
    std::iota(sigma.begin(), sigma.end(), 0);
    Coefficients acc{std::vector<double>(n, 0.0), {}};
    std::vector<std::vector<std::size_t>> subsets;
    std::map<std::vector<std::size_t>, std::size_t> subset_index;
    double count = 0.0;
    do {
      const Coefficients c = base(permute_features(f, sigma));
      // h(sigma x) = sum_t c_t x_{sigma(t)}: coefficient c_t lands on input sigma(t).
      for (std::size_t t = 0; t < n; ++t) acc.vector[sigma[t]] += c.vector[t];
      if (!c.cross.empty()) {
        if (subsets.empty()) {
          const std::size_t k = f.metric.dim - 1;
          subsets = combinations(n, k);
          for (std::size_t s = 0; s < subsets.size(); ++s) subset_index[subsets[s]] = s;
          acc.cross.assign(subsets.size(), 0.0);
        }
        if (c.cross.size() != subsets.size()) throw Error(ErrorCode::ShapeMismatch, "cross coefficient count changed");
        for (std::size_t s = 0; s < subsets.size(); ++s) {
          std::vector<std::size_t> image;
          for (std::size_t i : subsets[s]) image.push_back(sigma[i]);
          const double sign = detail::sort_with_sign(image);
          acc.cross[subset_index.at(image)] += sign * c.cross[s];
        }
      }
      count += 1.0;
    } while (std::next_permutation(sigma.begin(), sigma.end()));
    for (double& v : acc.vector) v /= count;
    for (double& v : acc.cross) v /= count;
    return acc;
  };
  return out;
}

/// Slot function of the pooled form: it sees its own squared norm, the sum of
/// its products with the other inputs, and the sum of the others' products
/// among themselves, so it cannot tell the other inputs apart.
using PooledSlotFn = std::function<double(double self, double with_others, double among_others)>;

inline CoefficientFn pooled_coefficients(std::string id, PooledSlotFn slot) {
  CoefficientFn out;
  out.id = std::move(id);
  out.fn = [slot = std::move(slot)](const ScalarFeatureSet& f) {
    const std::size_t n = f.n();
    double total = 0.0;
    std::vector<double> row(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        total += f.gram(i, j);
        row[i] += f.gram(i, j);
      }
    Coefficients c{std::vector<double>(n), {}};
    for (std::size_t t = 0; t < n; ++t) {
      const double self = f.gram(t, t);
      const double with_others = row[t] - self;
      const double among = total - 2.0 * row[t] + self;
      c.vector[t] = slot(self, with_others, among);
    }
    return c;
  };
  return out;
}

// ---------------------------------------------------------------------------
// Span residual
// ---------------------------------------------------------------------------

/// Euclidean norm of what is left of h after least-squares projection onto
/// span(x).
inline double span_check(const VectorTuple& x, const Vec& h) {
  if (x.is_empty()) return h.norm();
  if (x.dim() != h.dim()) throw DimensionError(x.dim(), h.dim(), "span_check");
  const Eigen::MatrixXd a = detail::columns_to_eigen(x);
  const Eigen::VectorXd b = detail::to_eigen(h);
  const Eigen::VectorXd coef = a.completeOrthogonalDecomposition().solve(b);
  return (a * coef - b).norm();
}

inline double span_check(const VectorTuple& x, const Vec& h, const Metric& /*metric*/) { return span_check(x, h); }

// ---------------------------------------------------------------------------
// Fixture registry
// ---------------------------------------------------------------------------

namespace fixtures {

inline CoefficientFn select_first() {
  return {"select_first", [](const ScalarFeatureSet& f) {
            Coefficients c{std::vector<double>(f.n(), 0.0), {}};
            c.vector[0] = 1.0;
            return c;
          }};
}

inline CoefficientFn uniform() {
  return {"uniform", [](const ScalarFeatureSet& f) {
            return Coefficients{std::vector<double>(f.n(), 1.0 / static_cast<double>(f.n())), {}};
          }};
}

/// f_t = t (1-based), deliberately not permutation symmetric.
inline CoefficientFn slot_index() {
  return {"slot_index", [](const ScalarFeatureSet& f) {
            Coefficients c{std::vector<double>(f.n()), {}};
            for (std::size_t t = 0; t < f.n(); ++t) c.vector[t] = static_cast<double>(t + 1);
            return c;
          }};
}

/// Smooth nonlinear function of the whole Gram matrix, different per slot.
inline CoefficientFn gram_mix() {
  return {"gram_mix", [](const ScalarFeatureSet& f) {
            const std::size_t n = f.n();
            Coefficients c{std::vector<double>(n), {}};
            double trace = 0.0;
            for (std::size_t i = 0; i < n; ++i) trace += f.gram(i, i);
            for (std::size_t t = 0; t < n; ++t) {
              double row = 0.0;
              for (std::size_t j = 0; j < n; ++j) row += f.gram(t, j);
              c.vector[t] = std::tanh(0.3 * row) + 0.1 * static_cast<double>(t + 1) / (1.0 + std::abs(trace)) +
                            0.05 * f.gram(t, t) * f.gram(t, (t + 1) % n);
            }
            return c;
          }};
}

/// f_t = 0, f_S = 1 on every (d-1)-subset.
inline CoefficientFn cross_only() {
  return {"cross_only", [](const ScalarFeatureSet& f) {
            const std::size_t k = f.metric.dim - 1;
            return Coefficients{std::vector<double>(f.n(), 0.0),
                                std::vector<double>(combinations(f.n(), k).size(), 1.0)};
          }};
}

/// Cross terms weighted by subdeterminants (when available) plus Gram terms.
inline CoefficientFn gram_cross() {
  return {"gram_cross", [](const ScalarFeatureSet& f) {
            const std::size_t n = f.n();
            const std::size_t k = f.metric.dim - 1;
            Coefficients c = gram_mix().fn(f);
            double pseudo = 0.0;
            if (f.subdets)
              for (const auto& s : *f.subdets) pseudo += s.value;
            const auto subsets = combinations(n, k);
            c.cross.resize(subsets.size());
            for (std::size_t s = 0; s < subsets.size(); ++s) {
              double w = 0.0;
              for (std::size_t i : subsets[s]) w += f.gram(i, i);
              // Subdeterminants flip sign under reflections; squaring keeps f_S invariant.
              c.cross[s] = 0.5 + 0.1 * std::tanh(w) + 0.01 * pseudo * pseudo;
            }
            return c;
          }};
}

inline const std::map<std::string, std::function<CoefficientFn()>>& registry() {
  static const std::map<std::string, std::function<CoefficientFn()>> r{
      {"select_first", select_first}, {"uniform", uniform},       {"slot_index", slot_index},
      {"gram_mix", gram_mix},         {"cross_only", cross_only}, {"gram_cross", gram_cross},
  };
  return r;
}

inline std::vector<std::string> ids() {
  std::vector<std::string> out;
  for (const auto& [id, make] : registry()) out.push_back(id);
  return out;
}

/// Looks up a fixture by id; "symmetrized(<id>)" wraps it in permutation averaging.
inline CoefficientFn lookup(const std::string& id) {
  const std::string prefix = "symmetrized(";
  if (id.rfind(prefix, 0) == 0 && id.back() == ')') {
    return symmetrize_permutation(lookup(id.substr(prefix.size(), id.size() - prefix.size() - 1)));
  }
  const auto it = registry().find(id);
  if (it == registry().end()) throw Error(ErrorCode::InvalidArgument, "unknown coefficient fixture '" + id + "'");
  return it->second();
}

}  // namespace fixtures

}  // namespace equiscalar
