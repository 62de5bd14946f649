#pragma once

// Einstein-summation index expressions: a small parser, a validator for the
// repeated-index rules, a brute-force evaluator, and the contraction of a
// pair of three-dimensional Levi-Civita symbols into Kronecker deltas.
//
//   expression := sign? term (sign term)*      sign := '+' | '-'
//   term       := factor+
//   factor     := NAME '_' INDICES | NAME '^' INDICES | 'eps_' INDICES | 'delta_' INDICES
//   INDICES    := [a-z]+
//
// NAME is [A-Za-z][A-Za-z0-9]*; "eps" and "delta" are reserved.

#include <algorithm>
#include <cctype>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "equiscalar/core_types.hpp"

namespace equiscalar::einsum {

enum class Variance { Lower, Upper };
enum class FactorKind { Tensor, Epsilon, Delta };

struct Index {
  char label = 'i';
  Variance variance = Variance::Lower;
  std::size_t offset = 0;  // byte offset in the source, for reports

  friend bool operator==(const Index& a, const Index& b) { return a.label == b.label && a.variance == b.variance; }
};

struct Factor {
  FactorKind kind = FactorKind::Tensor;
  std::string name;
  std::vector<Index> indices;

  friend bool operator==(const Factor& a, const Factor& b) {
    return a.kind == b.kind && a.name == b.name && a.indices == b.indices;
  }
};

struct Term {
  int sign = 1;
  std::vector<Factor> factors;

  friend bool operator==(const Term& a, const Term& b) { return a.sign == b.sign && a.factors == b.factors; }
};

struct IndexExpr {
  std::vector<Term> terms;

  friend bool operator==(const IndexExpr& a, const IndexExpr& b) { return a.terms == b.terms; }
};

class ParseError : public Error {
 public:
  ParseError(std::size_t offset, std::vector<std::string> expected, std::string found)
      : Error(ErrorCode::Parse, message(offset, expected, found)), offset_(offset), expected_(std::move(expected)) {}

  [[nodiscard]] std::size_t offset() const noexcept { return offset_; }
  [[nodiscard]] const std::vector<std::string>& expected() const noexcept { return expected_; }

 private:
  static std::string message(std::size_t offset, const std::vector<std::string>& expected, const std::string& found) {
    std::string m = "syntax error at offset " + std::to_string(offset) + ": expected ";
    for (std::size_t i = 0; i < expected.size(); ++i) m += (i ? " or " : "") + expected[i];
    return m + ", found " + found;
  }
  std::size_t offset_;
  std::vector<std::string> expected_;
};

// ---------------------------------------------------------------------------
// Parsing and printing
// ---------------------------------------------------------------------------

namespace detail {

class Parser {
 public:
  explicit Parser(std::string_view src) : src_(src) {}

  IndexExpr run() {
    IndexExpr expr;
    skip_ws();
    int sign = 1;
    if (peek() == '+' || peek() == '-') {
      sign = peek() == '-' ? -1 : 1;
      ++pos_;
    }
    for (;;) {
      expr.terms.push_back(term(sign));
      skip_ws();
      if (pos_ == src_.size()) break;
      if (peek() != '+' && peek() != '-') fail({"'+'", "'-'", "factor", "end of input"});
      sign = peek() == '-' ? -1 : 1;
      ++pos_;
    }
    return expr;
  }

 private:
  char peek() const { return pos_ < src_.size() ? src_[pos_] : '\0'; }

  void skip_ws() {
    while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
  }

  [[noreturn]] void fail(std::vector<std::string> expected) const {
    const std::string found = pos_ < src_.size() ? "'" + std::string(1, src_[pos_]) + "'" : "end of input";
    throw ParseError(pos_, std::move(expected), found);
  }

  Term term(int sign) {
    Term t{sign, {}};
    skip_ws();
    if (!std::isalpha(static_cast<unsigned char>(peek()))) fail({"factor"});
    while (std::isalpha(static_cast<unsigned char>(peek()))) {
      t.factors.push_back(factor());
      skip_ws();
    }
    return t;
  }

  Factor factor() {
    const std::size_t start = pos_;
    while (std::isalnum(static_cast<unsigned char>(peek()))) ++pos_;
    Factor f;
    f.name = std::string(src_.substr(start, pos_ - start));
    if (f.name == "eps") f.kind = FactorKind::Epsilon;
    if (f.name == "delta") f.kind = FactorKind::Delta;
    skip_ws();
    Variance var = Variance::Lower;
    if (peek() == '_') {
      var = Variance::Lower;
    } else if (peek() == '^' && f.kind == FactorKind::Tensor) {
      var = Variance::Upper;
    } else {
      fail(f.kind == FactorKind::Tensor ? std::vector<std::string>{"'_'", "'^'"} : std::vector<std::string>{"'_'"});
    }
    ++pos_;
    skip_ws();
    if (!std::islower(static_cast<unsigned char>(peek()))) fail({"index letter"});
    while (std::islower(static_cast<unsigned char>(peek()))) {
      f.indices.push_back({peek(), var, pos_});
      ++pos_;
    }
    return f;
  }

  std::string_view src_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline IndexExpr parse(std::string_view src) { return detail::Parser(src).run(); }

/// Canonical form: single spaces between factors, " + " / " - " between terms.
inline std::string to_string(const IndexExpr& e) {
  std::string out;
  for (std::size_t t = 0; t < e.terms.size(); ++t) {
    const Term& term = e.terms[t];
    if (t == 0) {
      if (term.sign < 0) out += "-";
    } else {
      out += term.sign < 0 ? " - " : " + ";
    }
    for (std::size_t f = 0; f < term.factors.size(); ++f) {
      const Factor& fac = term.factors[f];
      if (f) out += ' ';
      out += fac.name;
      out += fac.indices.empty() || fac.indices.front().variance == Variance::Lower ? '_' : '^';
      for (const Index& i : fac.indices) out += i.label;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

enum class Mode { Plain, MetricAware };

struct Violation {
  std::string rule;
  std::string message;
  std::vector<std::size_t> positions;
};

struct ValidationReport {
  bool valid = true;
  std::vector<char> free_indices;
  std::size_t output_order = 0;
  std::vector<Violation> violations;
};

namespace detail {

/// Labels of a term in order of first appearance with their occurrences.
inline std::vector<std::pair<char, std::vector<const Index*>>> label_uses(const Term& t) {
  std::vector<std::pair<char, std::vector<const Index*>>> uses;
  for (const Factor& f : t.factors)
    for (const Index& i : f.indices) {
      auto it = std::find_if(uses.begin(), uses.end(), [&](const auto& u) { return u.first == i.label; });
      if (it == uses.end()) {
        uses.push_back({i.label, {&i}});
      } else {
        it->second.push_back(&i);
      }
    }
  return uses;
}

inline std::vector<char> free_labels(const Term& t) {
  std::vector<char> out;
  for (const auto& [label, occ] : label_uses(t))
    if (occ.size() == 1) out.push_back(label);
  return out;
}

}  // namespace detail

inline ValidationReport validate(const IndexExpr& expr, const Metric& metric, Mode mode = Mode::Plain) {
  ValidationReport r;
  std::optional<std::set<char>> reference;
  for (std::size_t ti = 0; ti < expr.terms.size(); ++ti) {
    const Term& t = expr.terms[ti];
    for (const Factor& f : t.factors) {
      std::vector<std::size_t> where;
      for (const Index& i : f.indices) where.push_back(i.offset);
      if (f.kind == FactorKind::Epsilon) {
        std::set<char> distinct;
        for (const Index& i : f.indices) distinct.insert(i.label);
        if (f.indices.size() != metric.dim || distinct.size() != f.indices.size()) {
          r.violations.push_back({"epsilon-arity",
                                  "eps needs exactly " + std::to_string(metric.dim) + " distinct labels, got " +
                                      std::to_string(f.indices.size()) + " (" + std::to_string(distinct.size()) +
                                      " distinct)",
                                  where});
        }
      } else if (f.kind == FactorKind::Delta && f.indices.size() != 2) {
        r.violations.push_back(
            {"delta-arity", "delta needs exactly 2 labels, got " + std::to_string(f.indices.size()), where});
      }
    }
    for (const auto& [label, occ] : detail::label_uses(t)) {
      std::vector<std::size_t> where;
      for (const Index* i : occ) where.push_back(i->offset);
      if (occ.size() > 2) {
        r.violations.push_back({"once-or-twice",
                                std::string("label ") + label + " appears " + std::to_string(occ.size()) +
                                    " times in term " + std::to_string(ti + 1),
                                where});
      } else if (occ.size() == 2 && mode == Mode::MetricAware && occ[0]->variance == occ[1]->variance) {
        r.violations.push_back({"variance-pairing",
                                std::string("summed label ") + label + " needs one lower and one upper occurrence",
                                where});
      }
    }
    const std::vector<char> free = detail::free_labels(t);
    const std::set<char> free_set(free.begin(), free.end());
    if (!reference) {
      reference = free_set;
      r.free_indices = free;
    } else if (*reference != free_set) {
      std::vector<std::size_t> where;
      for (const Factor& f : t.factors)
        for (const Index& i : f.indices)
          if (free_set.count(i.label) != reference->count(i.label)) where.push_back(i.offset);
      r.violations.push_back({"free-index-mismatch",
                              "term " + std::to_string(ti + 1) + " has a different set of free labels than term 1",
                              where});
    }
  }
  r.output_order = r.free_indices.size();
  r.valid = r.violations.empty();
  return r;
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

/// Dense row-major tensor with every axis of length d.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> data;

  static Tensor scalar(double v) { return {{}, {v}}; }
  static Tensor from_vec(const Vec& v) { return {{v.dim()}, {v.components().begin(), v.components().end()}}; }
  static Tensor from_mat(const Mat& m) { return {{m.rows(), m.cols()}, m.entries()}; }

  [[nodiscard]] std::size_t order() const noexcept { return shape.size(); }

  [[nodiscard]] double at(const std::vector<std::size_t>& idx) const {
    std::size_t flat = 0;
    for (std::size_t a = 0; a < shape.size(); ++a) flat = flat * shape[a] + idx[a];
    return data[flat];
  }
};

inline constexpr std::size_t kMaxEvalDim = 4;
inline constexpr std::size_t kMaxEvalLabels = 8;

namespace detail {

inline double levi_civita(const std::vector<std::size_t>& v) {
  double sign = 1.0;
  for (std::size_t i = 0; i < v.size(); ++i)
    for (std::size_t j = i + 1; j < v.size(); ++j) {
      if (v[i] == v[j]) return 0.0;
      if (v[i] > v[j]) sign = -sign;
    }
  return sign;
}

}  // namespace detail

/// Brute-force evaluation: every label runs over 0..d-1. An Upper index picks
/// up the metric's diagonal entry, so u_i v^i is the metric inner product.
inline Tensor evaluate(const IndexExpr& expr, const std::map<std::string, Tensor>& bindings, std::size_t d,
                       const Metric& metric) {
  if (metric.dim != d) throw DimensionError(d, metric.dim, "einsum metric dimension");
  if (d == 0 || d > kMaxEvalDim) {
    throw Error(ErrorCode::InvalidArgument,
                "einsum evaluation supports 1 <= d <= " + std::to_string(kMaxEvalDim) + ", got " + std::to_string(d));
  }
  const ValidationReport report = validate(expr, metric, Mode::Plain);
  if (!report.valid) {
    throw Error(ErrorCode::InvalidArgument, "cannot evaluate an invalid expression: " + report.violations.front().message);
  }

  for (const Term& t : expr.terms)
    for (const Factor& f : t.factors) {
      if (f.kind != FactorKind::Tensor) continue;
      const auto it = bindings.find(f.name);
      if (it == bindings.end()) throw Error(ErrorCode::InvalidArgument, "unbound tensor '" + f.name + "'");
      const Tensor& b = it->second;
      if (b.order() != f.indices.size()) {
        throw Error(ErrorCode::ShapeMismatch, "tensor '" + f.name + "' has order " + std::to_string(b.order()) +
                                                  " but is used with " + std::to_string(f.indices.size()) + " indices");
      }
      std::size_t expected = 1;
      for (std::size_t s : b.shape) {
        if (s != d) throw DimensionError(d, s, "axis of tensor '" + f.name + "'");
        expected *= s;
      }
      if (b.data.size() != expected) throw Error(ErrorCode::ShapeMismatch, "tensor '" + f.name + "' has wrong data length");
    }

  const std::vector<char>& free = report.free_indices;
  Tensor out;
  out.shape.assign(free.size(), d);
  std::size_t total = 1;
  for (std::size_t a = 0; a < free.size(); ++a) total *= d;
  out.data.assign(total, 0.0);

  for (const Term& t : expr.terms) {
    const auto uses = detail::label_uses(t);
    if (uses.size() > kMaxEvalLabels) {
      throw Error(ErrorCode::InvalidArgument, "einsum evaluation supports at most " + std::to_string(kMaxEvalLabels) +
                                                  " distinct labels per term");
    }
    std::vector<char> labels;
    for (const auto& u : uses) labels.push_back(u.first);
    auto slot = [&](char c) { return static_cast<std::size_t>(std::find(labels.begin(), labels.end(), c) - labels.begin()); };
    std::vector<std::size_t> out_slots;
    for (char c : free) out_slots.push_back(slot(c));
    std::vector<std::vector<std::size_t>> factor_slots;
    for (const Factor& f : t.factors) {
      std::vector<std::size_t> s;
      for (const Index& i : f.indices) s.push_back(slot(i.label));
      factor_slots.push_back(std::move(s));
    }

    std::vector<std::size_t> value(labels.size(), 0);
    std::vector<std::size_t> idx;
    for (;;) {
      double prod = static_cast<double>(t.sign);
      for (std::size_t fi = 0; fi < t.factors.size() && prod != 0.0; ++fi) {
        const Factor& f = t.factors[fi];
        idx.clear();
        for (std::size_t s : factor_slots[fi]) idx.push_back(value[s]);
        switch (f.kind) {
          case FactorKind::Epsilon: prod *= detail::levi_civita(idx); break;
          case FactorKind::Delta: prod *= idx[0] == idx[1] ? 1.0 : 0.0; break;
          case FactorKind::Tensor: {
            prod *= bindings.at(f.name).at(idx);
            for (std::size_t a = 0; a < f.indices.size(); ++a)
              if (f.indices[a].variance == Variance::Upper) prod *= metric.signature(idx[a]);
            break;
          }
        }
      }
      std::size_t flat = 0;
      for (std::size_t s : out_slots) flat = flat * d + value[s];
      out.data[flat] += prod;

      std::size_t k = 0;
      while (k < value.size() && ++value[k] == d) value[k++] = 0;
      if (k == value.size()) break;
    }
  }
  return out;
}

/// Reorders the axes of t, labelled by from, so they follow the order in to.
inline Tensor permute_axes(const Tensor& t, const std::vector<char>& from, const std::vector<char>& to) {
  if (from.size() != t.order() || to.size() != t.order() ||
      !std::is_permutation(from.begin(), from.end(), to.begin())) {
    throw Error(ErrorCode::InvalidArgument, "permute_axes needs two orderings of the same labels");
  }
  const std::size_t order = t.order();
  std::vector<std::size_t> src_axis(order);
  for (std::size_t a = 0; a < order; ++a)
    src_axis[a] = static_cast<std::size_t>(std::find(from.begin(), from.end(), to[a]) - from.begin());
  Tensor out{std::vector<std::size_t>(order), std::vector<double>(t.data.size())};
  for (std::size_t a = 0; a < order; ++a) out.shape[a] = t.shape[src_axis[a]];
  std::vector<std::size_t> idx(order, 0), src(order);
  for (std::size_t flat = 0; flat < out.data.size(); ++flat) {
    for (std::size_t a = 0; a < order; ++a) src[src_axis[a]] = idx[a];
    out.data[flat] = t.at(src);
    for (std::size_t a = order; a-- > 0;) {
      if (++idx[a] < out.shape[a]) break;
      idx[a] = 0;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Levi-Civita pair contraction
// ---------------------------------------------------------------------------

/// eps_sab eps_smn -> delta_am delta_bn - delta_an delta_bm, for one term
/// holding exactly two three-index eps factors that share exactly one label.
inline IndexExpr rewrite_epsilon_pair(const IndexExpr& expr) {
  std::optional<std::size_t> target;
  for (std::size_t t = 0; t < expr.terms.size(); ++t) {
    const auto& fs = expr.terms[t].factors;
    const auto count = std::count_if(fs.begin(), fs.end(), [](const Factor& f) { return f.kind == FactorKind::Epsilon; });
    if (count == 0) continue;
    if (count != 2 || target) {
      throw Error(ErrorCode::Unsupported, "epsilon rewrite needs exactly one term with exactly two eps factors");
    }
    target = t;
  }
  if (!target) throw Error(ErrorCode::Unsupported, "epsilon rewrite found no eps factors");

  const Term& term = expr.terms[*target];
  std::vector<std::size_t> eps_at;
  for (std::size_t f = 0; f < term.factors.size(); ++f)
    if (term.factors[f].kind == FactorKind::Epsilon) eps_at.push_back(f);
  const Factor& e1 = term.factors[eps_at[0]];
  const Factor& e2 = term.factors[eps_at[1]];
  auto labels_of = [](const Factor& f) {
    std::vector<char> l;
    for (const Index& i : f.indices) l.push_back(i.label);
    return l;
  };
  std::vector<char> a = labels_of(e1), b = labels_of(e2);
  if (a.size() != 3 || b.size() != 3 || std::set<char>(a.begin(), a.end()).size() != 3 ||
      std::set<char>(b.begin(), b.end()).size() != 3) {
    throw Error(ErrorCode::Unsupported, "epsilon rewrite supports only three-dimensional eps with distinct labels");
  }
  std::vector<char> shared;
  for (char c : a)
    if (std::find(b.begin(), b.end(), c) != b.end()) shared.push_back(c);
  if (shared.size() != 1) {
    throw Error(ErrorCode::Unsupported, "epsilon rewrite needs the two eps factors to share exactly one label, they share " +
                                            std::to_string(shared.size()));
  }
  // Cyclic rotations keep the sign of eps, so bring the shared label to the front.
  auto rotate_front = [&](std::vector<char>& l) {
    while (l.front() != shared.front()) std::rotate(l.begin(), l.begin() + 1, l.end());
  };
  rotate_front(a);
  rotate_front(b);

  auto delta = [](char x, char y) { return Factor{FactorKind::Delta, "delta", {{x, Variance::Lower, 0}, {y, Variance::Lower, 0}}}; };
  auto build = [&](int sign, Factor d1, Factor d2) {
    Term out{term.sign * sign, {}};
    for (std::size_t f = 0; f < term.factors.size(); ++f) {
      if (f == eps_at[0]) {
        out.factors.push_back(d1);
        out.factors.push_back(d2);
      } else if (f != eps_at[1]) {
        out.factors.push_back(term.factors[f]);
      }
    }
    return out;
  };

  IndexExpr result;
  for (std::size_t t = 0; t < expr.terms.size(); ++t) {
    if (t != *target) {
      result.terms.push_back(expr.terms[t]);
      continue;
    }
    result.terms.push_back(build(1, delta(a[1], b[1]), delta(a[2], b[2])));
    result.terms.push_back(build(-1, delta(a[1], b[2]), delta(a[2], b[1])));
  }
  return result;
}

}  // namespace equiscalar::einsum
