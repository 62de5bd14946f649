#pragma once

/// Invariant scalar features of vector tuples: Gram matrices under either
/// metric, d x d subdeterminants (SO(d)), translation quotients, the
/// wrap-around band of Gram entries with low-rank completion, Cholesky
/// reconstruction and Minkowski Gram-Schmidt.

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "equiscalar/core_types.hpp"
#include "equiscalar/detail/eigen_bridge.hpp"
#include "equiscalar/random.hpp"

namespace equiscalar {

/// M[i][j] = <v_i, v_j>; computed for i <= j and mirrored so M is exactly symmetric.
inline Mat gram(const Metric& metric, const VectorTuple& x) {
  if (x.is_empty()) throw Error(ErrorCode::InvalidArgument, "gram of an empty tuple");
  if (x.dim() != metric.dim) throw DimensionError(metric.dim, x.dim(), "gram");
  const std::size_t n = x.size();
  std::vector<double> e(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) {
      const double g = inner(metric, x[i], x[j]);
      e[i * n + j] = g;
      e[j * n + i] = g;
    }
  return Mat(n, n, std::move(e));
}

/// All k-subsets of {0..n-1} in ascending lexicographic order.
inline std::vector<std::vector<std::size_t>> combinations(std::size_t n, std::size_t k) {
  std::vector<std::vector<std::size_t>> out;
  if (k > n) return out;
  std::vector<std::size_t> idx(k);
  for (std::size_t i = 0; i < k; ++i) idx[i] = i;
  for (;;) {
    out.push_back(idx);
    std::size_t i = k;
    while (i > 0 && idx[i - 1] == n - k + (i - 1)) --i;
    if (i == 0) break;
    ++idx[i - 1];
    for (std::size_t j = i; j < k; ++j) idx[j] = idx[j - 1] + 1;
  }
  return out;
}

struct Subdeterminant {
  std::vector<std::size_t> indices;  // ascending
  double value = 0.0;
};

/// det of the d x d matrix with columns (v_j), j in S, for every d-subset S.
inline std::vector<Subdeterminant> subdeterminants(const VectorTuple& x) {
  const std::size_t d = x.dim();
  if (x.size() < d) {
    throw Error(ErrorCode::InvalidArgument, "subdeterminants need n >= d (n=" + std::to_string(x.size()) +
                                                ", d=" + std::to_string(d) + ")");
  }
  std::vector<Subdeterminant> out;
  for (auto& subset : combinations(x.size(), d)) {
    std::vector<Vec> cols;
    cols.reserve(d);
    for (std::size_t j : subset) cols.push_back(x[j]);
    out.push_back({std::move(subset), determinant(Mat::from_columns(cols))});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Translation quotient
// ---------------------------------------------------------------------------

enum class PivotRule { FirstPosition, CenterOfPositions };

/// Replaces Position vectors by their differences against a pivot. FirstPosition
/// drops the pivot itself; CenterOfPositions keeps every vector, centred. Free
/// vectors pass through unchanged and every output vector is tagged Free.
inline VectorTuple translation_reduce(const VectorTuple& x, PivotRule pivot = PivotRule::FirstPosition) {
  const auto pos = x.position_indices();
  if (pos.empty()) throw Error(ErrorCode::InvalidArgument, "translation_reduce needs at least one Position vector");

  std::optional<Vec> origin;
  if (pivot == PivotRule::FirstPosition) {
    origin = x[pos.front()];
  } else {
    VecAccumulator acc(x.dim());
    for (std::size_t i : pos) acc.add(1.0 / static_cast<double>(pos.size()), x[i]);
    origin = acc.value();
  }

  std::vector<Vec> out;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x.role(i) == Role::Free) {
      out.push_back(x[i]);
    } else if (pivot == PivotRule::CenterOfPositions || i != pos.front()) {
      out.push_back(x[i] - *origin);
    }
  }
  if (out.empty()) return VectorTuple::empty(x.dim());
  return VectorTuple(std::move(out));
}

// ---------------------------------------------------------------------------
// Wrap-around band and completion
// ---------------------------------------------------------------------------

struct OmegaEntry {
  std::size_t row = 0;
  std::size_t col = 0;
  double value = 0.0;
};

/// Entries M[i][(i+s) mod n] for i in [0, n), s in [0, d], stored i-major.
struct OmegaSample {
  std::size_t n = 0;
  std::size_t d = 0;
  std::vector<OmegaEntry> entries;
};

inline OmegaSample omega_sample(const Mat& m, std::size_t d) {
  if (!m.square()) throw Error(ErrorCode::ShapeMismatch, "omega_sample needs a square matrix");
  const std::size_t n = m.rows();
  if (n < d + 1) {
    throw Error(ErrorCode::InvalidArgument, "omega_sample needs n >= d+1 (n=" + std::to_string(n) +
                                                ", d=" + std::to_string(d) + "); use the full gram instead");
  }
  OmegaSample s{n, d, {}};
  s.entries.reserve(n * (d + 1));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k <= d; ++k) {
      const std::size_t j = (i + k) % n;
      s.entries.push_back({i, j, m(i, j)});
    }
  return s;
}

struct CompletionOptions {
  std::size_t max_iterations = 500;
  double min_decrease = 1e-12;    // on the objective after scaling the samples to unit RMS
  double fit_tolerance = 1e-8;    // relative RMS on sampled entries required for success
  std::size_t max_restarts = 8;   // random re-initialisations tried after the spectral start
  std::uint64_t init_seed = 0x0A15'5EEDULL;
};

struct CompletionResult {
  Mat matrix;
  bool converged = false;   // stopped by the decrease rule with a fit within tolerance
  double residual = 0.0;    // relative RMS misfit on the sampled entries
  std::size_t iterations = 0;
  std::size_t restarts = 0;
};

/// Rank-d completion of a symmetric matrix from its wrap-around band, by
/// alternating least squares on M ~ W^T H (W, H of shape d x n). Both (i,j)
/// and (j,i) count as observations. The first run starts from the leading
/// eigenvectors of the zero-filled sample; if it stalls above fit_tolerance,
/// random starts are tried and the best fit is kept. The output is symmetrised.
inline CompletionResult omega_complete(const OmegaSample& sample, const CompletionOptions& opts = {}) {
  const std::size_t n = sample.n;
  const auto r = static_cast<Eigen::Index>(std::max<std::size_t>(sample.d, 1));
  const auto nn = static_cast<Eigen::Index>(n);
  if (n == 0) throw Error(ErrorCode::InvalidArgument, "empty omega sample");

  std::map<std::pair<std::size_t, std::size_t>, double> obs;
  for (const auto& e : sample.entries) {
    if (e.row >= n || e.col >= n) throw Error(ErrorCode::InvalidArgument, "omega entry index out of range");
    obs[{e.row, e.col}] = e.value;
    obs.try_emplace({e.col, e.row}, e.value);
  }
  double sumsq = 0.0;
  for (const auto& kv : obs) sumsq += kv.second * kv.second;
  const double unit = sumsq > 0.0 ? std::sqrt(sumsq / static_cast<double>(obs.size())) : 1.0;

  std::vector<std::vector<std::pair<std::size_t, double>>> by_row(n), by_col(n);
  for (const auto& [key, v] : obs) {
    by_row[key.first].emplace_back(key.second, v / unit);
    by_col[key.second].emplace_back(key.first, v / unit);
  }
  const double scale = sumsq / (unit * unit);

  auto solve_side = [&](Eigen::MatrixXd& target, const Eigen::MatrixXd& fixed,
                        const std::vector<std::vector<std::pair<std::size_t, double>>>& lists) {
    for (std::size_t a = 0; a < n; ++a) {
      const auto& list = lists[a];
      Eigen::MatrixXd A(static_cast<Eigen::Index>(list.size()), r);
      Eigen::VectorXd b(static_cast<Eigen::Index>(list.size()));
      for (std::size_t k = 0; k < list.size(); ++k) {
        A.row(static_cast<Eigen::Index>(k)) = fixed.col(static_cast<Eigen::Index>(list[k].first)).transpose();
        b(static_cast<Eigen::Index>(k)) = list[k].second;
      }
      target.col(static_cast<Eigen::Index>(a)) = A.colPivHouseholderQr().solve(b);
    }
  };
  auto objective = [&](const Eigen::MatrixXd& w, const Eigen::MatrixXd& h) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (const auto& [j, v] : by_row[i]) {
        const double diff = w.col(static_cast<Eigen::Index>(i)).dot(h.col(static_cast<Eigen::Index>(j))) - v;
        s += diff * diff;
      }
    return s;
  };
  struct Run {
    Eigen::MatrixXd w, h;
    double obj = 0.0;
    std::size_t iterations = 0;
    bool stalled = false;
  };
  auto run = [&](Eigen::MatrixXd w, Eigen::MatrixXd h) {
    Run out;
    double prev = objective(w, h);
    while (out.iterations < opts.max_iterations) {
      solve_side(w, h, by_row);
      solve_side(h, w, by_col);
      ++out.iterations;
      const double obj = objective(w, h);
      const double decrease = prev - obj;
      prev = obj;
      if (decrease < opts.min_decrease) {
        out.stalled = true;
        break;
      }
    }
    out.w = std::move(w);
    out.h = std::move(h);
    out.obj = prev;
    return out;
  };
  auto relative = [&](double obj) { return scale > 0.0 ? std::sqrt(obj / scale) : std::sqrt(obj); };

  Eigen::MatrixXd filled = Eigen::MatrixXd::Zero(nn, nn);
  for (std::size_t i = 0; i < n; ++i)
    for (const auto& [j, v] : by_row[i]) filled(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(filled);
  Eigen::MatrixXd w0(r, nn);
  for (Eigen::Index k = 0; k < r; ++k) {
    const Eigen::Index idx = nn - 1 - std::min(k, nn - 1);
    w0.row(k) = eig.eigenvectors().col(idx).transpose() * std::sqrt(std::abs(eig.eigenvalues()(idx)) + 1e-3);
  }
  Run best = run(w0, w0);
  std::size_t restarts = 0;
  std::size_t total_iterations = best.iterations;
  RngState rng(opts.init_seed);
  while (relative(best.obj) > opts.fit_tolerance && restarts < opts.max_restarts) {
    ++restarts;
    Eigen::MatrixXd w(r, nn), h(r, nn);
    for (Eigen::Index j = 0; j < nn; ++j)
      for (Eigen::Index i = 0; i < r; ++i) {
        w(i, j) = rng.normal();
        h(i, j) = rng.normal();
      }
    Run attempt = run(std::move(w), std::move(h));
    total_iterations += attempt.iterations;
    if (attempt.obj < best.obj) best = std::move(attempt);
  }

  // ALS crawls once it is in the right basin; a few damped Gauss-Newton steps
  // on (W, H) jointly finish the fit.
  {
    const Eigen::Index np = 2 * r * nn;
    auto residuals = [&](const Eigen::MatrixXd& w, const Eigen::MatrixXd& h) {
      Eigen::VectorXd res(static_cast<Eigen::Index>(obs.size()));
      Eigen::Index k = 0;
      for (std::size_t i = 0; i < n; ++i)
        for (const auto& [j, v] : by_row[i])
          res(k++) = w.col(static_cast<Eigen::Index>(i)).dot(h.col(static_cast<Eigen::Index>(j))) - v;
      return res;
    };
    double lambda = 1e-6;
    for (int step = 0; step < 50 && relative(best.obj) > 1e-14; ++step) {
      Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(obs.size()), np);
      Eigen::Index k = 0;
      for (std::size_t i = 0; i < n; ++i)
        for (const auto& [j, v] : by_row[i]) {
          (void)v;
          const auto ii = static_cast<Eigen::Index>(i), jj = static_cast<Eigen::Index>(j);
          jac.block(k, ii * r, 1, r) = best.h.col(jj).transpose();
          jac.block(k, r * nn + jj * r, 1, r) = best.w.col(ii).transpose();
          ++k;
        }
      const Eigen::VectorXd res = residuals(best.w, best.h);
      const Eigen::MatrixXd jtj = jac.transpose() * jac;
      const Eigen::VectorXd jtr = jac.transpose() * res;
      bool improved = false;
      for (int tries = 0; tries < 10 && !improved; ++tries) {
        Eigen::MatrixXd damped = jtj;
        damped.diagonal().array() += lambda * (1.0 + jtj.diagonal().array());
        const Eigen::VectorXd delta = damped.ldlt().solve(-jtr);
        Eigen::MatrixXd w = best.w, h = best.h;
        for (Eigen::Index c = 0; c < nn; ++c) {
          w.col(c) += delta.segment(c * r, r);
          h.col(c) += delta.segment(r * nn + c * r, r);
        }
        const double obj = objective(w, h);
        if (obj < best.obj) {
          best.w = std::move(w);
          best.h = std::move(h);
          best.obj = obj;
          lambda = std::max(lambda * 0.1, 1e-12);
          improved = true;
        } else {
          lambda *= 10.0;
        }
      }
      if (!improved) break;
    }
  }

  const Eigen::MatrixXd full = unit * (best.w.transpose() * best.h);
  const Eigen::MatrixXd sym = 0.5 * (full + full.transpose());
  CompletionResult result{detail::from_eigen(sym), false, relative(best.obj), total_iterations, restarts};
  result.converged = best.stalled && result.residual <= opts.fit_tolerance;
  return result;
}

// ---------------------------------------------------------------------------
// Cholesky reconstruction
// ---------------------------------------------------------------------------

inline constexpr double kPsdEigenFloor = -1e-9;

class IndefiniteMatrixError : public Error {
 public:
  explicit IndefiniteMatrixError(double min_eigenvalue)
      : Error(ErrorCode::InvalidArgument,
              "matrix is not positive semidefinite; most negative eigenvalue " + std::to_string(min_eigenvalue)),
        min_eigenvalue_(min_eigenvalue) {}

  [[nodiscard]] double min_eigenvalue() const noexcept { return min_eigenvalue_; }

 private:
  double min_eigenvalue_;
};

/// Vectors whose Euclidean Gram matrix is m, via diagonally pivoted Cholesky.
/// Output vectors live in `dim` ambient dimensions (default n); coordinates
/// beyond the numerical rank are zero. The result is one representative of
/// the O(d) orbit realising m.
inline VectorTuple cholesky_reconstruct(const Mat& m, std::optional<std::size_t> dim = std::nullopt) {
  if (!m.square()) throw Error(ErrorCode::ShapeMismatch, "cholesky_reconstruct needs a square matrix");
  const std::size_t n = m.rows();
  double scale = 1.0;
  for (double v : m.entries()) scale = std::max(scale, std::abs(v));
  if (max_abs_diff(m, transpose(m)) > 1e-12 * scale) {
    throw Error(ErrorCode::InvalidArgument, "cholesky_reconstruct needs a symmetric matrix");
  }
  const Eigen::MatrixXd a = detail::to_eigen(m);
  const double min_eig = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(a, Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
  if (min_eig < kPsdEigenFloor) throw IndefiniteMatrixError(min_eig);

  // Outer-product pivoted Cholesky on a working copy.
  Eigen::MatrixXd s = a;
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  Eigen::MatrixXd l = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  const double stop = 1e-13 * scale;
  std::size_t rank = 0;
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t p = k;
    for (std::size_t i = k + 1; i < n; ++i)
      if (s(static_cast<Eigen::Index>(perm[i]), static_cast<Eigen::Index>(perm[i])) >
          s(static_cast<Eigen::Index>(perm[p]), static_cast<Eigen::Index>(perm[p])))
        p = i;
    std::swap(perm[k], perm[p]);
    for (Eigen::Index c = 0; c < static_cast<Eigen::Index>(k); ++c)
      std::swap(l(static_cast<Eigen::Index>(k), c), l(static_cast<Eigen::Index>(p), c));
    const auto pk = static_cast<Eigen::Index>(perm[k]);
    const double pivot = s(pk, pk);
    if (pivot <= stop) break;
    const double root = std::sqrt(pivot);
    const auto kk = static_cast<Eigen::Index>(k);
    l(kk, kk) = root;
    for (std::size_t i = k + 1; i < n; ++i) {
      const auto pi = static_cast<Eigen::Index>(perm[i]);
      l(static_cast<Eigen::Index>(i), kk) = s(pi, pk) / root;
    }
    for (std::size_t i = k + 1; i < n; ++i)
      for (std::size_t j = k + 1; j < n; ++j) {
        const auto pi = static_cast<Eigen::Index>(perm[i]);
        const auto pj = static_cast<Eigen::Index>(perm[j]);
        s(pi, pj) -= l(static_cast<Eigen::Index>(i), kk) * l(static_cast<Eigen::Index>(j), kk);
      }
    rank = k + 1;
  }

  const std::size_t out_dim = dim.value_or(n);
  if (out_dim < std::max<std::size_t>(rank, 1)) {
    throw Error(ErrorCode::InvalidArgument, "requested dimension " + std::to_string(out_dim) +
                                                " is below the matrix rank " + std::to_string(rank));
  }
  std::vector<std::vector<double>> coords(n, std::vector<double>(out_dim, 0.0));
  for (std::size_t a_row = 0; a_row < n; ++a_row)
    for (std::size_t c = 0; c < rank; ++c)
      coords[perm[a_row]][c] = l(static_cast<Eigen::Index>(a_row), static_cast<Eigen::Index>(c));
  std::vector<Vec> vs;
  vs.reserve(n);
  for (auto& c : coords) vs.emplace_back(std::move(c));
  return VectorTuple(std::move(vs));
}

// ---------------------------------------------------------------------------
// Minkowski Gram-Schmidt
// ---------------------------------------------------------------------------

struct LorentzOrthogonalizeOptions {
  double lightlike_tol = 1e-10;  // |<u,u>| < tol * |u|^2_Euclid counts as lightlike
  std::size_t max_restarts = 50;
};

struct LorentzBasis {
  VectorTuple basis;
  std::size_t restarts = 0;
};

/// Gram-Schmidt under the Minkowski form. When an intermediate vector is
/// (numerically) lightlike, the not-yet-processed inputs are replaced by
/// random linear combinations of themselves and that block is redone; a
/// lightlike last vector triggers a full re-mix.
inline LorentzBasis lorentz_orthogonalize(const VectorTuple& x, RngState& rng,
                                          const LorentzOrthogonalizeOptions& opts = {}) {
  if (x.is_empty()) throw Error(ErrorCode::InvalidArgument, "lorentz_orthogonalize of an empty tuple");
  if (x.dim() < 2) throw Error(ErrorCode::InvalidArgument, "Minkowski space needs dimension >= 2");
  const std::size_t m = x.size();
  if (m > x.dim()) throw Error(ErrorCode::Degenerate, "more vectors than dimensions: inputs are linearly dependent");

  std::vector<Eigen::VectorXd> w;
  for (const Vec& v : x.vectors()) w.push_back(detail::to_eigen(v));
  {
    Eigen::MatrixXd cols = detail::columns_to_eigen(x);
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(cols);
    qr.setThreshold(1e-12);
    if (static_cast<std::size_t>(qr.rank()) < m) throw Error(ErrorCode::Degenerate, "inputs are linearly dependent");
  }

  auto mink = [&](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    double s = a(0) * b(0);
    for (Eigen::Index i = 1; i < a.size(); ++i) s -= a(i) * b(i);
    return s;
  };
  auto remix = [&](std::size_t from) {
    const std::size_t k = m - from;
    std::vector<Eigen::VectorXd> mixed(k, Eigen::VectorXd::Zero(w[0].size()));
    for (std::size_t a = 0; a < k; ++a)
      for (std::size_t b = 0; b < k; ++b) mixed[a] += rng.normal() * w[from + b];
    for (std::size_t a = 0; a < k; ++a) w[from + a] = mixed[a];
  };

  std::vector<Eigen::VectorXd> u;
  std::size_t restarts = 0;
  std::size_t j = 0;
  while (j < m) {
    Eigen::VectorXd uj = w[j];
    for (int pass = 0; pass < 2; ++pass)
      for (const auto& uk : u) uj -= (mink(uj, uk) / mink(uk, uk)) * uk;
    const double e2 = uj.squaredNorm();
    if (e2 <= 1e-24 * w[j].squaredNorm()) throw Error(ErrorCode::Degenerate, "inputs are linearly dependent");
    if (std::abs(mink(uj, uj)) < opts.lightlike_tol * e2) {
      if (m == 1) throw Error(ErrorCode::Degenerate, "a single lightlike vector cannot be re-mixed");
      if (++restarts > opts.max_restarts) {
        throw Error(ErrorCode::Degenerate, "lightlike degeneracy persists after " +
                                               std::to_string(opts.max_restarts) + " restarts");
      }
      if (j + 1 < m) {
        remix(j);
      } else {
        remix(0);
        u.clear();
        j = 0;
      }
      continue;
    }
    u.push_back(uj);
    ++j;
  }

  std::vector<Vec> out;
  out.reserve(m);
  for (const auto& v : u) out.push_back(detail::from_eigen_vec(v));
  return {VectorTuple(std::move(out)), restarts};
}

// ---------------------------------------------------------------------------
// Feature set
// ---------------------------------------------------------------------------

/// Everything a coefficient function may look at: the Gram matrix and,
/// optionally, SO(d) subdeterminants and the wrap-around band.
struct ScalarFeatureSet {
  Mat gram;
  Metric metric;
  std::optional<std::vector<Subdeterminant>> subdets;
  std::optional<OmegaSample> omega;
  std::vector<Role> roles;  // role tags of the tuple the features describe

  [[nodiscard]] std::size_t n() const noexcept { return gram.rows(); }
};

struct FeatureOptions {
  bool subdets = false;
  std::optional<std::size_t> omega_d;
};

inline ScalarFeatureSet compute_features(const Metric& metric, const VectorTuple& x, const FeatureOptions& opts = {}) {
  ScalarFeatureSet f{gram(metric, x), metric, std::nullopt, std::nullopt, x.roles()};
  if (opts.subdets) f.subdets = subdeterminants(x);
  if (opts.omega_d) f.omega = omega_sample(f.gram, *opts.omega_d);
  return f;
}

}  // namespace equiscalar
