#pragma once

/// Random elements of O(d), SO(d), O(1,d), T(d), E(d), the Poincare group and
/// S_n, and their actions on role-tagged vector tuples.
///
/// Linear groups act by v -> Qv on every vector. Translations act on
/// Position-tagged vectors only. Permutations act by
/// (sigma * x)_i = x_{sigma(i)}, moving roles together with the vectors.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "equiscalar/core_types.hpp"
#include "equiscalar/detail/eigen_bridge.hpp"
#include "equiscalar/random.hpp"

namespace equiscalar {

enum class GroupFamily { Orthogonal, Rotation, Lorentz, Translation, Permutation, Euclidean, Poincare };

inline const char* to_string(GroupFamily f) {
  switch (f) {
    case GroupFamily::Orthogonal: return "orthogonal";
    case GroupFamily::Rotation: return "rotation";
    case GroupFamily::Lorentz: return "lorentz";
    case GroupFamily::Translation: return "translation";
    case GroupFamily::Permutation: return "permutation";
    case GroupFamily::Euclidean: return "euclidean";
    case GroupFamily::Poincare: return "poincare";
  }
  return "unknown";
}

inline constexpr double kOrthogonalTol = 1e-12;
inline constexpr double kDeterminantTol = 1e-9;
inline constexpr double kLorentzTol = 1e-9;
inline constexpr double kDefaultRapidityMax = 2.0;

/// max |Q^T Q - I|
inline double orthogonality_defect(const Mat& q) {
  return max_abs_diff(matmul(transpose(q), q), Mat::identity(q.rows()));
}

/// max |Q^T Lambda Q - Lambda|
inline double lorentz_defect(const Mat& q) {
  const Mat lambda = signature_matrix(Metric::minkowski(q.rows()));
  return max_abs_diff(matmul(matmul(transpose(q), lambda), q), lambda);
}

class GroupElement {
 public:
  struct Linear {
    Mat q;
  };
  struct Shift {
    Vec w;
  };
  struct Perm {
    std::vector<std::size_t> sigma;
  };
  struct Affine {
    Vec w;
    Mat q;
  };

  static GroupElement orthogonal(Mat q) {
    check_square(q);
    const double defect = orthogonality_defect(q);
    if (defect > kOrthogonalTol) {
      throw Error(ErrorCode::InvalidArgument, "matrix is not orthogonal (defect " + std::to_string(defect) + ")");
    }
    return GroupElement(GroupFamily::Orthogonal, Linear{std::move(q)});
  }
  static GroupElement rotation(Mat q) {
    GroupElement g = orthogonal(q);
    const double det = determinant(q);
    if (std::abs(det - 1.0) > kDeterminantTol) {
      throw Error(ErrorCode::InvalidArgument, "rotation must have determinant +1, got " + std::to_string(det));
    }
    g.family_ = GroupFamily::Rotation;
    return g;
  }
  static GroupElement lorentz(Mat q) {
    check_square(q);
    if (q.rows() < 2) throw Error(ErrorCode::InvalidArgument, "Lorentz matrices need dimension >= 2");
    const double defect = lorentz_defect(q);
    if (defect > kLorentzTol) {
      throw Error(ErrorCode::InvalidArgument, "matrix does not preserve the Minkowski form (defect " +
                                                  std::to_string(defect) + ")");
    }
    return GroupElement(GroupFamily::Lorentz, Linear{std::move(q)});
  }
  static GroupElement translation(Vec w) { return GroupElement(GroupFamily::Translation, Shift{std::move(w)}); }
  static GroupElement permutation(std::vector<std::size_t> sigma) {
    std::vector<bool> seen(sigma.size(), false);
    for (std::size_t s : sigma) {
      if (s >= sigma.size() || seen[s]) throw Error(ErrorCode::InvalidArgument, "permutation is not a bijection");
      seen[s] = true;
    }
    return GroupElement(GroupFamily::Permutation, Perm{std::move(sigma)});
  }
  static GroupElement euclidean(Vec w, Mat q) {
    GroupElement lin = orthogonal(std::move(q));
    if (w.dim() != lin.dim()) throw DimensionError(lin.dim(), w.dim(), "euclidean motion translation");
    return GroupElement(GroupFamily::Euclidean, Affine{std::move(w), std::get<Linear>(lin.data_).q});
  }
  static GroupElement poincare(Vec w, Mat q) {
    GroupElement lin = lorentz(std::move(q));
    if (w.dim() != lin.dim()) throw DimensionError(lin.dim(), w.dim(), "poincare translation");
    return GroupElement(GroupFamily::Poincare, Affine{std::move(w), std::get<Linear>(lin.data_).q});
  }

  static GroupElement identity(GroupFamily family, std::size_t dim) {
    switch (family) {
      case GroupFamily::Orthogonal: return orthogonal(Mat::identity(dim));
      case GroupFamily::Rotation: return rotation(Mat::identity(dim));
      case GroupFamily::Lorentz: return lorentz(Mat::identity(dim));
      case GroupFamily::Translation: return translation(Vec::zeros(dim));
      case GroupFamily::Permutation: {
        std::vector<std::size_t> s(dim);
        std::iota(s.begin(), s.end(), std::size_t{0});
        return permutation(std::move(s));
      }
      case GroupFamily::Euclidean: return euclidean(Vec::zeros(dim), Mat::identity(dim));
      case GroupFamily::Poincare: return poincare(Vec::zeros(dim), Mat::identity(dim));
    }
    throw Error(ErrorCode::InvalidArgument, "unknown group family");
  }

  [[nodiscard]] GroupFamily family() const noexcept { return family_; }

  /// Ambient dimension (or n for permutations).
  [[nodiscard]] std::size_t dim() const {
    return std::visit(
        [](const auto& e) -> std::size_t {
          using T = std::decay_t<decltype(e)>;
          if constexpr (std::is_same_v<T, Linear>) return e.q.rows();
          else if constexpr (std::is_same_v<T, Shift>) return e.w.dim();
          else if constexpr (std::is_same_v<T, Perm>) return e.sigma.size();
          else return e.w.dim();
        },
        data_);
  }

  /// Q for linear and affine families.
  [[nodiscard]] std::optional<Mat> linear_part() const {
    if (const auto* l = std::get_if<Linear>(&data_)) return l->q;
    if (const auto* a = std::get_if<Affine>(&data_)) return a->q;
    return std::nullopt;
  }
  /// w for translation and affine families.
  [[nodiscard]] std::optional<Vec> translation_part() const {
    if (const auto* s = std::get_if<Shift>(&data_)) return s->w;
    if (const auto* a = std::get_if<Affine>(&data_)) return a->w;
    return std::nullopt;
  }
  [[nodiscard]] const std::vector<std::size_t>* permutation_part() const {
    if (const auto* p = std::get_if<Perm>(&data_)) return &p->sigma;
    return nullptr;
  }
  /// det(Q) for families with a linear part, +1 otherwise.
  [[nodiscard]] double orientation() const {
    const auto q = linear_part();
    return q ? determinant(*q) : 1.0;
  }

 private:
  using Data = std::variant<Linear, Shift, Perm, Affine>;

  GroupElement(GroupFamily family, Data data) : family_(family), data_(std::move(data)) {}

  static void check_square(const Mat& q) {
    if (!q.square()) throw Error(ErrorCode::ShapeMismatch, "group matrix must be square");
  }

  GroupFamily family_;
  Data data_;
};

// ---------------------------------------------------------------------------
// Actions
// ---------------------------------------------------------------------------

/// Image of a single vector under the linear part of g, plus the translation
/// when `translates` is set. Permutations leave a single vector unchanged.
inline Vec act_on_vector(const GroupElement& g, const Vec& v, bool translates) {
  Vec out = v;
  if (const auto q = g.linear_part()) {
    if (q->cols() != v.dim()) throw DimensionError(q->cols(), v.dim(), "group action");
    out = *q * v;
  }
  if (translates) {
    if (const auto w = g.translation_part()) {
      if (w->dim() != v.dim()) throw DimensionError(w->dim(), v.dim(), "translation action");
      out = out + *w;
    }
  }
  return out;
}

inline VectorTuple apply(const GroupElement& g, const VectorTuple& x) {
  if (x.is_empty()) return x;
  if (const auto* sigma = g.permutation_part()) {
    if (sigma->size() != x.size()) throw DimensionError(x.size(), sigma->size(), "permutation length");
    std::vector<Vec> vs;
    std::vector<Role> rs;
    vs.reserve(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
      vs.push_back(x[(*sigma)[i]]);
      rs.push_back(x.role((*sigma)[i]));
    }
    return VectorTuple(std::move(vs), std::move(rs));
  }
  if (g.dim() != x.dim()) throw DimensionError(g.dim(), x.dim(), "group element vs tuple dimension");
  std::vector<Vec> vs;
  vs.reserve(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) vs.push_back(act_on_vector(g, x[i], x.role(i) == Role::Position));
  return VectorTuple(std::move(vs), x.roles());
}

/// Group product with apply(compose(g1, g2), x) == apply(g1, apply(g2, x)).
inline GroupElement compose(const GroupElement& g1, const GroupElement& g2) {
  if (g1.family() != g2.family()) {
    throw Error(ErrorCode::InvalidArgument, std::string("cannot compose ") + to_string(g1.family()) + " with " +
                                                to_string(g2.family()));
  }
  if (g1.dim() != g2.dim()) throw DimensionError(g1.dim(), g2.dim(), "compose");
  switch (g1.family()) {
    case GroupFamily::Orthogonal: return GroupElement::orthogonal(matmul(*g1.linear_part(), *g2.linear_part()));
    case GroupFamily::Rotation: return GroupElement::rotation(matmul(*g1.linear_part(), *g2.linear_part()));
    case GroupFamily::Lorentz: return GroupElement::lorentz(matmul(*g1.linear_part(), *g2.linear_part()));
    case GroupFamily::Translation: return GroupElement::translation(*g1.translation_part() + *g2.translation_part());
    case GroupFamily::Permutation: {
      // x' = g2*x has x'_j = x_{s2(j)}; g1*x' has entry i = x'_{s1(i)} = x_{s2(s1(i))}.
      const auto& s1 = *g1.permutation_part();
      const auto& s2 = *g2.permutation_part();
      std::vector<std::size_t> s(s1.size());
      for (std::size_t i = 0; i < s.size(); ++i) s[i] = s2[s1[i]];
      return GroupElement::permutation(std::move(s));
    }
    case GroupFamily::Euclidean:
    case GroupFamily::Poincare: {
      const Mat q1 = *g1.linear_part();
      const Vec w = *g1.translation_part() + q1 * *g2.translation_part();
      const Mat q = matmul(q1, *g2.linear_part());
      return g1.family() == GroupFamily::Euclidean ? GroupElement::euclidean(w, q) : GroupElement::poincare(w, q);
    }
  }
  throw Error(ErrorCode::InvalidArgument, "unknown group family");
}

inline GroupElement inverse(const GroupElement& g) {
  switch (g.family()) {
    case GroupFamily::Orthogonal: return GroupElement::orthogonal(transpose(*g.linear_part()));
    case GroupFamily::Rotation: return GroupElement::rotation(transpose(*g.linear_part()));
    case GroupFamily::Lorentz: {
      // Q^{-1} = Lambda Q^T Lambda
      const Mat lambda = signature_matrix(Metric::minkowski(g.dim()));
      return GroupElement::lorentz(matmul(matmul(lambda, transpose(*g.linear_part())), lambda));
    }
    case GroupFamily::Translation: return GroupElement::translation(-*g.translation_part());
    case GroupFamily::Permutation: {
      const auto& s = *g.permutation_part();
      std::vector<std::size_t> inv(s.size());
      for (std::size_t i = 0; i < s.size(); ++i) inv[s[i]] = i;
      return GroupElement::permutation(std::move(inv));
    }
    case GroupFamily::Euclidean: {
      const Mat qt = transpose(*g.linear_part());
      return GroupElement::euclidean(-(qt * *g.translation_part()), qt);
    }
    case GroupFamily::Poincare: {
      const Mat lambda = signature_matrix(Metric::minkowski(g.dim()));
      const Mat qi = matmul(matmul(lambda, transpose(*g.linear_part())), lambda);
      return GroupElement::poincare(-(qi * *g.translation_part()), qi);
    }
  }
  throw Error(ErrorCode::InvalidArgument, "unknown group family");
}

// ---------------------------------------------------------------------------
// Sampling
// ---------------------------------------------------------------------------

namespace detail {

inline Mat haar_orthogonal_matrix(RngState& rng, std::size_t d) {
  Eigen::MatrixXd a(d, d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rng.normal();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(a.rows(), a.cols());
  const Eigen::MatrixXd r = qr.matrixQR();
  for (Eigen::Index j = 0; j < q.cols(); ++j)
    if (r(j, j) < 0.0) q.col(j) *= -1.0;
  return from_eigen(q);
}

inline Mat negate_column(const Mat& q, std::size_t col) {
  std::vector<double> e(q.entries());
  for (std::size_t i = 0; i < q.rows(); ++i) e[i * q.cols() + col] = -e[i * q.cols() + col];
  return Mat(q.rows(), q.cols(), std::move(e));
}

inline Vec random_unit_vector(RngState& rng, std::size_t d) {
  for (;;) {
    std::vector<double> c(d);
    double n2 = 0.0;
    for (double& x : c) {
      x = rng.normal();
      n2 += x * x;
    }
    if (n2 > 1e-24) {
      const double inv = 1.0 / std::sqrt(n2);
      for (double& x : c) x *= inv;
      return Vec(std::move(c));
    }
  }
}

}  // namespace detail

/// Haar-distributed element of O(d): sign-corrected QR of a Gaussian matrix,
/// followed by a fair-coin sign flip of one uniformly chosen column.
inline GroupElement sample_orthogonal(RngState& rng, std::size_t d) {
  if (d < 1) throw Error(ErrorCode::InvalidArgument, "dimension must be >= 1");
  Mat q = detail::haar_orthogonal_matrix(rng, d);
  const std::size_t col = rng.index(d);
  if (rng.coin()) q = detail::negate_column(q, col);
  return GroupElement::orthogonal(std::move(q));
}

/// Haar-distributed element of SO(d).
inline GroupElement sample_rotation(RngState& rng, std::size_t d) {
  if (d < 1) throw Error(ErrorCode::InvalidArgument, "dimension must be >= 1");
  Mat q = detail::haar_orthogonal_matrix(rng, d);
  if (determinant(q) < 0.0) q = detail::negate_column(q, 0);
  return GroupElement::rotation(std::move(q));
}

/// Pure boost of the given rapidity along a unit spatial direction
/// (direction has dimension d_plus_1 - 1).
inline Mat lorentz_boost(double rapidity, const Vec& direction) {
  const std::size_t d = direction.dim();
  const std::size_t n = d + 1;
  const double ch = std::cosh(rapidity);
  const double sh = std::sinh(rapidity);
  std::vector<double> e(n * n, 0.0);
  e[0] = ch;
  for (std::size_t i = 0; i < d; ++i) {
    e[i + 1] = sh * direction[i];
    e[(i + 1) * n] = sh * direction[i];
    for (std::size_t j = 0; j < d; ++j) {
      e[(i + 1) * n + (j + 1)] = (i == j ? 1.0 : 0.0) + (ch - 1.0) * direction[i] * direction[j];
    }
  }
  return Mat(n, n, std::move(e));
}

/// Embeds a spatial d x d matrix in the lower block of a (d+1) x (d+1) identity.
inline Mat embed_spatial(const Mat& r) {
  const std::size_t n = r.rows() + 1;
  std::vector<double> e(n * n, 0.0);
  e[0] = 1.0;
  for (std::size_t i = 0; i < r.rows(); ++i)
    for (std::size_t j = 0; j < r.cols(); ++j) e[(i + 1) * n + (j + 1)] = r(i, j);
  return Mat(n, n, std::move(e));
}

/// B(phi, n) * R with R a Haar spatial rotation, phi ~ U(-rapidity_max,
/// rapidity_max) and n uniform on the spatial unit sphere.
inline GroupElement sample_lorentz(RngState& rng, std::size_t d_plus_1, double rapidity_max = kDefaultRapidityMax) {
  if (d_plus_1 < 2) throw Error(ErrorCode::InvalidArgument, "Lorentz sampling needs d+1 >= 2");
  if (!(rapidity_max > 0.0)) throw Error(ErrorCode::InvalidArgument, "rapidity_max must be positive");
  const std::size_t d = d_plus_1 - 1;
  const Mat r = embed_spatial(*sample_rotation(rng, d).linear_part());
  const double phi = rng.uniform(-rapidity_max, rapidity_max);
  const Vec axis = detail::random_unit_vector(rng, d);
  return GroupElement::lorentz(matmul(lorentz_boost(phi, axis), r));
}

inline GroupElement sample_translation(RngState& rng, std::size_t d, double scale = 1.0) {
  std::vector<double> w(d);
  for (double& x : w) x = scale * rng.normal();
  return GroupElement::translation(Vec(std::move(w)));
}

/// Uniform permutation of {0..n-1} (Fisher-Yates).
inline GroupElement sample_permutation(RngState& rng, std::size_t n) {
  std::vector<std::size_t> s(n);
  std::iota(s.begin(), s.end(), std::size_t{0});
  for (std::size_t i = n; i > 1; --i) std::swap(s[i - 1], s[rng.index(i)]);
  return GroupElement::permutation(std::move(s));
}

inline GroupElement sample_euclidean(RngState& rng, std::size_t d) {
  const GroupElement w = sample_translation(rng, d);
  const GroupElement q = sample_orthogonal(rng, d);
  return GroupElement::euclidean(*w.translation_part(), *q.linear_part());
}

inline GroupElement sample_poincare(RngState& rng, std::size_t d_plus_1, double rapidity_max = kDefaultRapidityMax) {
  const GroupElement w = sample_translation(rng, d_plus_1);
  const GroupElement q = sample_lorentz(rng, d_plus_1, rapidity_max);
  return GroupElement::poincare(*w.translation_part(), *q.linear_part());
}

/// Dispatches on family; `dim` is n for permutations.
inline GroupElement sample_group(RngState& rng, GroupFamily family, std::size_t dim,
                                 double rapidity_max = kDefaultRapidityMax) {
  switch (family) {
    case GroupFamily::Orthogonal: return sample_orthogonal(rng, dim);
    case GroupFamily::Rotation: return sample_rotation(rng, dim);
    case GroupFamily::Lorentz: return sample_lorentz(rng, dim, rapidity_max);
    case GroupFamily::Translation: return sample_translation(rng, dim);
    case GroupFamily::Permutation: return sample_permutation(rng, dim);
    case GroupFamily::Euclidean: return sample_euclidean(rng, dim);
    case GroupFamily::Poincare: return sample_poincare(rng, dim, rapidity_max);
  }
  throw Error(ErrorCode::InvalidArgument, "unknown group family");
}

}  // namespace equiscalar
