#pragma once

/// Shared geometric data model: vectors, role-tagged tuples, metrics and
/// small dense matrices. Every value is immutable after construction and
/// rejects non-finite components up front.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace equiscalar {

enum class ErrorCode {
  DimensionMismatch,
  ShapeMismatch,
  NonFinite,
  InvalidArgument,
  Degenerate,
  NotConverged,
  Parse,
  Unsupported,
  Io,
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::DimensionMismatch: return "dimension-mismatch";
    case ErrorCode::ShapeMismatch: return "shape-mismatch";
    case ErrorCode::NonFinite: return "non-finite";
    case ErrorCode::InvalidArgument: return "invalid-argument";
    case ErrorCode::Degenerate: return "degenerate";
    case ErrorCode::NotConverged: return "not-converged";
    case ErrorCode::Parse: return "parse";
    case ErrorCode::Unsupported: return "unsupported";
    case ErrorCode::Io: return "io";
  }
  return "unknown";
}

/// Base of every error raised by the library. The code classifies the
/// failure; subclasses carry the structured payload.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  [[nodiscard]] ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

class DimensionError : public Error {
 public:
  DimensionError(std::size_t expected, std::size_t actual, const std::string& context)
      : Error(ErrorCode::DimensionMismatch,
              context + ": expected dimension " + std::to_string(expected) + ", got " +
                  std::to_string(actual)),
        expected_(expected),
        actual_(actual) {}

  [[nodiscard]] std::size_t expected() const noexcept { return expected_; }
  [[nodiscard]] std::size_t actual() const noexcept { return actual_; }

 private:
  std::size_t expected_;
  std::size_t actual_;
};

namespace detail {

inline void require_finite(std::span<const double> values, const char* what) {
  for (double v : values) {
    if (!std::isfinite(v)) {
      throw Error(ErrorCode::NonFinite, std::string(what) + " contains a non-finite entry");
    }
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Vec
// ---------------------------------------------------------------------------

class Vec {
 public:
  explicit Vec(std::vector<double> components) : c_(std::move(components)) {
    if (c_.empty()) throw Error(ErrorCode::InvalidArgument, "vector must have dimension >= 1");
    detail::require_finite(c_, "vector");
  }
  Vec(std::initializer_list<double> components) : Vec(std::vector<double>(components)) {}

  static Vec zeros(std::size_t d) { return Vec(std::vector<double>(d, 0.0)); }
  static Vec basis(std::size_t d, std::size_t k) {
    std::vector<double> c(d, 0.0);
    c.at(k) = 1.0;
    return Vec(std::move(c));
  }

  [[nodiscard]] std::size_t dim() const noexcept { return c_.size(); }
  [[nodiscard]] double operator[](std::size_t i) const { return c_[i]; }
  [[nodiscard]] std::span<const double> components() const noexcept { return c_; }
  [[nodiscard]] const std::vector<double>& data() const noexcept { return c_; }

  /// Plain Euclidean dot product; metric-aware products go through inner().
  [[nodiscard]] double dot(const Vec& other) const {
    check_same(other, "dot");
    double s = 0.0;
    for (std::size_t i = 0; i < c_.size(); ++i) s += c_[i] * other.c_[i];
    return s;
  }
  [[nodiscard]] double norm() const { return std::sqrt(dot(*this)); }
  [[nodiscard]] double max_abs() const {
    double m = 0.0;
    for (double v : c_) m = std::max(m, std::abs(v));
    return m;
  }

  friend Vec operator+(const Vec& a, const Vec& b) {
    a.check_same(b, "vector addition");
    std::vector<double> r(a.c_);
    for (std::size_t i = 0; i < r.size(); ++i) r[i] += b.c_[i];
    return Vec(std::move(r));
  }
  friend Vec operator-(const Vec& a, const Vec& b) {
    a.check_same(b, "vector subtraction");
    std::vector<double> r(a.c_);
    for (std::size_t i = 0; i < r.size(); ++i) r[i] -= b.c_[i];
    return Vec(std::move(r));
  }
  friend Vec operator*(double s, const Vec& a) {
    std::vector<double> r(a.c_);
    for (double& v : r) v *= s;
    return Vec(std::move(r));
  }
  friend Vec operator-(const Vec& a) { return -1.0 * a; }
  friend bool operator==(const Vec& a, const Vec& b) { return a.c_ == b.c_; }

 private:
  void check_same(const Vec& other, const char* what) const {
    if (other.dim() != dim()) throw DimensionError(dim(), other.dim(), what);
  }

  std::vector<double> c_;
};

/// Accumulates a linear combination without re-validating each partial sum.
class VecAccumulator {
 public:
  explicit VecAccumulator(std::size_t d) : acc_(d, 0.0) {}

  void add(double coeff, const Vec& v) {
    if (v.dim() != acc_.size()) throw DimensionError(acc_.size(), v.dim(), "linear combination");
    for (std::size_t i = 0; i < acc_.size(); ++i) acc_[i] += coeff * v[i];
  }
  [[nodiscard]] Vec value() const { return Vec(acc_); }

 private:
  std::vector<double> acc_;
};

// ---------------------------------------------------------------------------
// Metric
// ---------------------------------------------------------------------------

enum class MetricKind { Euclidean, Minkowski };

/// Euclidean or Minkowski signature on an ambient space of dimension `dim`.
/// Minkowski puts the single timelike axis first: diag(1, -1, ..., -1).
struct Metric {
  MetricKind kind = MetricKind::Euclidean;
  std::size_t dim = 3;

  static Metric euclidean(std::size_t d) { return Metric::make(MetricKind::Euclidean, d); }
  static Metric minkowski(std::size_t d_plus_1) {
    if (d_plus_1 < 2) {
      throw Error(ErrorCode::InvalidArgument, "Minkowski metric needs at least one time and one space axis");
    }
    return Metric::make(MetricKind::Minkowski, d_plus_1);
  }
  static Metric make(MetricKind kind, std::size_t dim) {
    if (dim == 0) throw Error(ErrorCode::InvalidArgument, "metric dimension must be positive");
    return Metric{kind, dim};
  }

  /// Diagonal entry of the signature matrix.
  [[nodiscard]] double signature(std::size_t i) const {
    return (kind == MetricKind::Minkowski && i > 0) ? -1.0 : 1.0;
  }
  [[nodiscard]] bool is_minkowski() const noexcept { return kind == MetricKind::Minkowski; }

  friend bool operator==(const Metric&, const Metric&) = default;
};

inline const char* to_string(MetricKind k) {
  return k == MetricKind::Euclidean ? "euclidean" : "minkowski";
}

/// a^T b (Euclidean) or a^T Lambda b (Minkowski).
inline double inner(const Metric& metric, const Vec& a, const Vec& b) {
  if (a.dim() != metric.dim) throw DimensionError(metric.dim, a.dim(), "inner: first argument");
  if (b.dim() != metric.dim) throw DimensionError(metric.dim, b.dim(), "inner: second argument");
  double s = a[0] * b[0];
  const double sign = metric.signature(1);
  for (std::size_t i = 1; i < a.dim(); ++i) s += sign * (a[i] * b[i]);
  return s;
}

// ---------------------------------------------------------------------------
// Mat
// ---------------------------------------------------------------------------

/// Dense row-major matrix of doubles.
class Mat {
 public:
  Mat(std::size_t rows, std::size_t cols, std::vector<double> entries)
      : rows_(rows), cols_(cols), e_(std::move(entries)) {
    if (rows == 0 || cols == 0) throw Error(ErrorCode::ShapeMismatch, "matrix must be non-empty");
    if (e_.size() != rows * cols) {
      throw Error(ErrorCode::ShapeMismatch, "matrix entry count " + std::to_string(e_.size()) +
                                                " does not match " + std::to_string(rows) + "x" +
                                                std::to_string(cols));
    }
    detail::require_finite(e_, "matrix");
  }

  static Mat zeros(std::size_t rows, std::size_t cols) {
    return Mat(rows, cols, std::vector<double>(rows * cols, 0.0));
  }
  static Mat identity(std::size_t n) {
    std::vector<double> e(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) e[i * n + i] = 1.0;
    return Mat(n, n, std::move(e));
  }
  static Mat diagonal(std::span<const double> diag) {
    const std::size_t n = diag.size();
    std::vector<double> e(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) e[i * n + i] = diag[i];
    return Mat(n, n, std::move(e));
  }
  static Mat from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r ? rows.begin()->size() : 0;
    std::vector<double> e;
    e.reserve(r * c);
    for (const auto& row : rows) {
      if (row.size() != c) throw Error(ErrorCode::ShapeMismatch, "ragged row list");
      e.insert(e.end(), row.begin(), row.end());
    }
    return Mat(r, c, std::move(e));
  }
  /// Matrix whose columns are the given vectors (the d x n matrix V).
  static Mat from_columns(std::span<const Vec> columns) {
    if (columns.empty()) throw Error(ErrorCode::ShapeMismatch, "no columns");
    const std::size_t d = columns[0].dim();
    std::vector<double> e(d * columns.size());
    for (std::size_t j = 0; j < columns.size(); ++j) {
      if (columns[j].dim() != d) throw DimensionError(d, columns[j].dim(), "from_columns");
      for (std::size_t i = 0; i < d; ++i) e[i * columns.size() + j] = columns[j][i];
    }
    return Mat(d, columns.size(), std::move(e));
  }

  [[nodiscard]] std::size_t rows() const noexcept { return rows_; }
  [[nodiscard]] std::size_t cols() const noexcept { return cols_; }
  [[nodiscard]] bool square() const noexcept { return rows_ == cols_; }
  [[nodiscard]] double operator()(std::size_t i, std::size_t j) const { return e_[i * cols_ + j]; }
  [[nodiscard]] const std::vector<double>& entries() const noexcept { return e_; }

  [[nodiscard]] Vec column(std::size_t j) const {
    std::vector<double> c(rows_);
    for (std::size_t i = 0; i < rows_; ++i) c[i] = (*this)(i, j);
    return Vec(std::move(c));
  }
  [[nodiscard]] Vec row(std::size_t i) const {
    return Vec(std::vector<double>(e_.begin() + static_cast<std::ptrdiff_t>(i * cols_),
                                   e_.begin() + static_cast<std::ptrdiff_t>((i + 1) * cols_)));
  }

  friend bool operator==(const Mat& a, const Mat& b) {
    return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.e_ == b.e_;
  }

 private:
  std::size_t rows_;
  std::size_t cols_;
  std::vector<double> e_;
};

inline Mat transpose(const Mat& a) {
  std::vector<double> e(a.rows() * a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) e[j * a.rows() + i] = a(i, j);
  return Mat(a.cols(), a.rows(), std::move(e));
}

inline Mat matmul(const Mat& a, const Mat& b) {
  if (a.cols() != b.rows()) {
    throw Error(ErrorCode::ShapeMismatch, "matmul: " + std::to_string(a.rows()) + "x" +
                                              std::to_string(a.cols()) + " times " +
                                              std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
  }
  std::vector<double> e(a.rows() * b.cols(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      for (std::size_t j = 0; j < b.cols(); ++j) e[i * b.cols() + j] += aik * b(k, j);
    }
  return Mat(a.rows(), b.cols(), std::move(e));
}

inline Vec operator*(const Mat& a, const Vec& v) {
  if (a.cols() != v.dim()) throw DimensionError(a.cols(), v.dim(), "matrix-vector product");
  std::vector<double> r(a.rows(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) r[i] += a(i, j) * v[j];
  return Vec(std::move(r));
}

inline Mat operator*(const Mat& a, const Mat& b) { return matmul(a, b); }

inline Mat operator-(const Mat& a, const Mat& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw Error(ErrorCode::ShapeMismatch, "matrix subtraction");
  std::vector<double> e(a.entries());
  for (std::size_t i = 0; i < e.size(); ++i) e[i] -= b.entries()[i];
  return Mat(a.rows(), a.cols(), std::move(e));
}

inline Mat scaled(double s, const Mat& a) {
  std::vector<double> e(a.entries());
  for (double& x : e) x *= s;
  return Mat(a.rows(), a.cols(), std::move(e));
}

/// Determinant by LU with partial pivoting.
inline double determinant(const Mat& a) {
  if (!a.square()) throw Error(ErrorCode::ShapeMismatch, "determinant of a non-square matrix");
  const std::size_t n = a.rows();
  std::vector<double> lu(a.entries());
  double det = 1.0;
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t piv = k;
    for (std::size_t i = k + 1; i < n; ++i)
      if (std::abs(lu[i * n + k]) > std::abs(lu[piv * n + k])) piv = i;
    if (lu[piv * n + k] == 0.0) return 0.0;
    if (piv != k) {
      for (std::size_t j = 0; j < n; ++j) std::swap(lu[k * n + j], lu[piv * n + j]);
      det = -det;
    }
    const double p = lu[k * n + k];
    det *= p;
    for (std::size_t i = k + 1; i < n; ++i) {
      const double f = lu[i * n + k] / p;
      for (std::size_t j = k + 1; j < n; ++j) lu[i * n + j] -= f * lu[k * n + j];
    }
  }
  return det;
}

inline double max_abs_diff(const Mat& a, const Mat& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw Error(ErrorCode::ShapeMismatch, "max_abs_diff");
  double m = 0.0;
  for (std::size_t i = 0; i < a.entries().size(); ++i)
    m = std::max(m, std::abs(a.entries()[i] - b.entries()[i]));
  return m;
}

inline double frobenius_norm(const Mat& a) {
  double s = 0.0;
  for (double x : a.entries()) s += x * x;
  return std::sqrt(s);
}

/// The signature matrix of a metric (identity for Euclidean).
inline Mat signature_matrix(const Metric& metric) {
  std::vector<double> diag(metric.dim);
  for (std::size_t i = 0; i < metric.dim; ++i) diag[i] = metric.signature(i);
  return Mat::diagonal(diag);
}

// ---------------------------------------------------------------------------
// VectorTuple
// ---------------------------------------------------------------------------

/// Position vectors move under translations; free vectors do not.
enum class Role { Position, Free };

inline const char* to_string(Role r) { return r == Role::Position ? "position" : "free"; }

/// An ordered list of n vectors of one common dimension, each tagged with a role.
class VectorTuple {
 public:
  VectorTuple(std::vector<Vec> vectors, std::vector<Role> roles)
      : dim_(vectors.empty() ? 0 : vectors.front().dim()), vectors_(std::move(vectors)), roles_(std::move(roles)) {
    if (vectors_.empty()) throw Error(ErrorCode::InvalidArgument, "use VectorTuple::empty for an empty tuple");
    validate();
  }

  /// All vectors tagged Free.
  explicit VectorTuple(std::vector<Vec> vectors)
      : VectorTuple(vectors, std::vector<Role>(vectors.size(), Role::Free)) {}

  static VectorTuple empty(std::size_t dim) { return VectorTuple(dim); }

  [[nodiscard]] std::size_t dim() const noexcept { return dim_; }
  [[nodiscard]] std::size_t size() const noexcept { return vectors_.size(); }
  [[nodiscard]] bool is_empty() const noexcept { return vectors_.empty(); }
  [[nodiscard]] const Vec& operator[](std::size_t i) const { return vectors_[i]; }
  [[nodiscard]] const std::vector<Vec>& vectors() const noexcept { return vectors_; }
  [[nodiscard]] const std::vector<Role>& roles() const noexcept { return roles_; }
  [[nodiscard]] Role role(std::size_t i) const { return roles_[i]; }

  [[nodiscard]] std::vector<std::size_t> position_indices() const {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < roles_.size(); ++i)
      if (roles_[i] == Role::Position) idx.push_back(i);
    return idx;
  }
  [[nodiscard]] bool has_positions() const {
    return std::find(roles_.begin(), roles_.end(), Role::Position) != roles_.end();
  }

  /// d x n matrix with the vectors as columns.
  [[nodiscard]] Mat as_columns() const { return Mat::from_columns(vectors_); }

  friend bool operator==(const VectorTuple& a, const VectorTuple& b) {
    return a.dim_ == b.dim_ && a.vectors_ == b.vectors_ && a.roles_ == b.roles_;
  }

 private:
  explicit VectorTuple(std::size_t dim) : dim_(dim) {
    if (dim == 0) throw Error(ErrorCode::InvalidArgument, "tuple dimension must be positive");
  }

  void validate() const {
    if (roles_.size() != vectors_.size()) {
      throw Error(ErrorCode::ShapeMismatch, "roles length " + std::to_string(roles_.size()) +
                                                " does not match vector count " + std::to_string(vectors_.size()));
    }
    for (const Vec& v : vectors_)
      if (v.dim() != dim_) throw DimensionError(dim_, v.dim(), "tuple vectors must share one dimension");
  }

  std::size_t dim_;
  std::vector<Vec> vectors_;
  std::vector<Role> roles_;
};

/// Max-norm distance between two tuples of the same shape.
inline double max_abs_diff(const VectorTuple& a, const VectorTuple& b) {
  if (a.size() != b.size() || a.dim() != b.dim()) throw Error(ErrorCode::ShapeMismatch, "tuple shapes differ");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, (a[i] - b[i]).max_abs());
  return m;
}

}  // namespace equiscalar
