#pragma once

// Randomized symmetry certification. A target function maps a list of slots
// (vectors with role tags plus invariant scalar attributes) to scalars or
// vectors; each trial samples an input and one element per group, applies
// the composed action to the input, and compares f(g x) with g f(x).

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "equiscalar/core_types.hpp"
#include "equiscalar/group_actions.hpp"
#include "equiscalar/parallel.hpp"
#include "equiscalar/random.hpp"

namespace equiscalar {

/// How the output transforms under the linear and translation parts.
enum class OutputLaw { ScalarInvariant, VectorEquivariant, VectorTranslationInvariant, PseudoVector };

/// How outputs are indexed, which fixes how a slot permutation moves them.
enum class OutputIndexing { Global, PerSlot, PerPair };

inline const char* to_string(OutputLaw o) {
  switch (o) {
    case OutputLaw::ScalarInvariant: return "scalar-invariant";
    case OutputLaw::VectorEquivariant: return "vector-equivariant";
    case OutputLaw::VectorTranslationInvariant: return "vector-translation-invariant";
    case OutputLaw::PseudoVector: return "pseudo-vector";
  }
  return "unknown";
}

inline const char* to_string(OutputIndexing o) {
  switch (o) {
    case OutputIndexing::Global: return "global";
    case OutputIndexing::PerSlot: return "per-slot";
    case OutputIndexing::PerPair: return "per-pair";
  }
  return "unknown";
}

struct Slot {
  std::vector<Vec> vectors;
  std::vector<double> attributes;
};

using CertInput = std::vector<Slot>;

struct CertOutput {
  std::vector<double> scalars;
  std::vector<Vec> vectors;
};

using CertFn = std::function<CertOutput(const CertInput&)>;

struct SymmetrySpec {
  GroupFamily family = GroupFamily::Orthogonal;
  std::size_t dim = 3;                     // ambient vector dimension
  std::size_t slots = 1;                   // also the permutation size
  std::vector<Role> slot_roles{Role::Free};  // one tag per vector in a slot
  std::size_t attributes = 0;
  OutputLaw output = OutputLaw::VectorEquivariant;
  OutputIndexing indexing = OutputIndexing::Global;
  double rapidity_max = kDefaultRapidityMax;
};

struct ComponentStats {
  std::size_t trials = 0;
  std::size_t failures = 0;
  double max_residual = 0.0;
  double mean_residual = 0.0;
};

struct TrialFailure {
  std::size_t trial = 0;
  std::string message;
  CertInput input;
};

struct CertReport {
  std::size_t trials = 0;
  double max_residual = 0.0;
  double mean_residual = 0.0;
  std::size_t worst_trial = 0;
  CertInput worst_input;
  std::map<std::string, ComponentStats> components;  // keyed "det=+1" / "det=-1" when a linear part exists
  std::vector<TrialFailure> failures;

  [[nodiscard]] bool passed(double tol) const { return failures.empty() && max_residual <= tol; }
};

struct CertOptions {
  std::size_t threads = 1;
  bool lightlike_trials = true;  // odd trials of Lorentz-type specs use a near-lightlike first vector
  std::optional<CertInput> fixed_input;  // certify around one input instead of sampling
};

namespace detail {

inline bool lorentz_type(GroupFamily f) { return f == GroupFamily::Lorentz || f == GroupFamily::Poincare; }

inline void check_specs(const std::vector<SymmetrySpec>& specs) {
  if (specs.empty()) throw Error(ErrorCode::InvalidArgument, "certification needs at least one symmetry spec");
  const SymmetrySpec& a = specs.front();
  if (a.dim == 0 || a.slots == 0 || a.slot_roles.empty()) {
    throw Error(ErrorCode::InvalidArgument, "spec needs positive dimension, slot count and vectors per slot");
  }
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const SymmetrySpec& b = specs[i];
    if (b.dim != a.dim || b.slots != a.slots || b.slot_roles != a.slot_roles || b.attributes != a.attributes ||
        b.output != a.output || b.indexing != a.indexing) {
      throw Error(ErrorCode::InvalidArgument, "spec " + std::to_string(i) + " (" + to_string(b.family) +
                                                  ") disagrees with spec 0 on input layout or output law");
    }
    for (std::size_t j = 0; j < i; ++j)
      if (specs[j].family == b.family) {
        throw Error(ErrorCode::InvalidArgument, std::string("group family ") + to_string(b.family) + " listed twice");
      }
  }
}

/// Permutation first, then translations, then linear parts.
inline int action_rank(GroupFamily f) {
  switch (f) {
    case GroupFamily::Permutation: return 0;
    case GroupFamily::Translation: return 1;
    default: return 2;
  }
}

inline CertInput sample_input(RngState& rng, const SymmetrySpec& s, bool lightlike) {
  CertInput x(s.slots);
  for (Slot& slot : x) {
    for (std::size_t k = 0; k < s.slot_roles.size(); ++k) {
      std::vector<double> c(s.dim);
      for (double& v : c) v = rng.normal();
      slot.vectors.emplace_back(std::move(c));
    }
    for (std::size_t a = 0; a < s.attributes; ++a) slot.attributes.push_back(rng.normal());
  }
  if (lightlike && s.dim >= 2) {
    // Unit timelike axis plus 0.999 times a unit spacelike direction.
    std::vector<double> c(s.dim, 0.0);
    double norm = 0.0;
    while (norm < 1e-6) {
      norm = 0.0;
      for (std::size_t i = 1; i < s.dim; ++i) {
        c[i] = rng.normal();
        norm += c[i] * c[i];
      }
      norm = std::sqrt(norm);
    }
    for (std::size_t i = 1; i < s.dim; ++i) c[i] *= 0.999 / norm;
    c[0] = 1.0;
    x[0].vectors[0] = Vec(std::move(c));
  }
  return x;
}

inline CertInput act_on_input(const GroupElement& g, const CertInput& x, const std::vector<Role>& roles) {
  if (const auto* sigma = g.permutation_part()) {
    if (sigma->size() != x.size()) throw DimensionError(x.size(), sigma->size(), "permutation length");
    CertInput out;
    for (std::size_t i = 0; i < x.size(); ++i) out.push_back(x[(*sigma)[i]]);
    return out;
  }
  CertInput out = x;
  for (Slot& slot : out)
    for (std::size_t k = 0; k < slot.vectors.size(); ++k)
      slot.vectors[k] = act_on_vector(g, slot.vectors[k], roles[k] == Role::Position);
  return out;
}

template <class T>
std::vector<T> permute_outputs(const std::vector<T>& v, const std::vector<std::size_t>& sigma, OutputIndexing ix) {
  const std::size_t n = sigma.size();
  if (ix == OutputIndexing::Global || v.empty()) return v;
  if (ix == OutputIndexing::PerSlot) {
    if (v.size() != n) throw DimensionError(n, v.size(), "per-slot outputs");
    std::vector<T> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back(v[sigma[i]]);
    return out;
  }
  if (v.size() != n * n) throw DimensionError(n * n, v.size(), "per-pair outputs");
  std::vector<T> out;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) out.push_back(v[sigma[i] * n + sigma[j]]);
  return out;
}

inline CertOutput act_on_output(const GroupElement& g, const CertOutput& y, OutputLaw law, OutputIndexing ix) {
  if (const auto* sigma = g.permutation_part()) {
    return {permute_outputs(y.scalars, *sigma, ix), permute_outputs(y.vectors, *sigma, ix)};
  }
  CertOutput out = y;
  if (law == OutputLaw::ScalarInvariant) return out;
  const double sign = law == OutputLaw::PseudoVector ? g.orientation() : 1.0;
  for (Vec& v : out.vectors) v = sign * act_on_vector(g, v, law == OutputLaw::VectorEquivariant);
  return out;
}

inline double output_norm(const CertOutput& y) {
  double s = 0.0;
  for (double v : y.scalars) s += v * v;
  for (const Vec& v : y.vectors) s += v.dot(v);
  return std::sqrt(s);
}

inline double output_distance(const CertOutput& a, const CertOutput& b) {
  if (a.scalars.size() != b.scalars.size() || a.vectors.size() != b.vectors.size()) {
    throw Error(ErrorCode::ShapeMismatch, "target returned outputs of different shape on transformed input");
  }
  double s = 0.0;
  for (std::size_t i = 0; i < a.scalars.size(); ++i) s += (a.scalars[i] - b.scalars[i]) * (a.scalars[i] - b.scalars[i]);
  for (std::size_t i = 0; i < a.vectors.size(); ++i) {
    const Vec d = a.vectors[i] - b.vectors[i];
    s += d.dot(d);
  }
  return std::sqrt(s);
}

inline void check_output(const CertOutput& y, const SymmetrySpec& s) {
  const bool scalar = s.output == OutputLaw::ScalarInvariant;
  const std::size_t count = scalar ? y.scalars.size() : y.vectors.size();
  if (scalar ? !y.vectors.empty() : !y.scalars.empty()) {
    throw Error(ErrorCode::ShapeMismatch, std::string("output law ") + to_string(s.output) +
                                              (scalar ? " expects scalars only" : " expects vectors only"));
  }
  if (s.indexing == OutputIndexing::PerSlot && count != s.slots) {
    throw DimensionError(s.slots, count, "per-slot output count");
  }
  if (s.indexing == OutputIndexing::PerPair && count != s.slots * s.slots) {
    throw DimensionError(s.slots * s.slots, count, "per-pair output count");
  }
  for (const Vec& v : y.vectors)
    if (v.dim() != s.dim) throw DimensionError(s.dim, v.dim(), "output vector");
}

struct TrialResult {
  double residual = 0.0;
  double orientation = 1.0;
  bool failed = false;
  std::string message;
  CertInput input;
};

}  // namespace detail

/// Jointly certifies f against every group in `specs`. Trial t draws from
/// rng.split(t), so the report depends only on the seed and trial count.
inline CertReport certify_joint(const CertFn& fn, const std::vector<SymmetrySpec>& specs, std::size_t trials,
                                const RngState& rng, const CertOptions& opts = {}) {
  if (trials == 0) throw Error(ErrorCode::InvalidArgument, "trials must be at least 1");
  if (!fn) throw Error(ErrorCode::InvalidArgument, "certification target is empty");
  detail::check_specs(specs);
  if (opts.fixed_input) {
    const SymmetrySpec& s = specs.front();
    if (opts.fixed_input->size() != s.slots) throw DimensionError(s.slots, opts.fixed_input->size(), "fixed input slots");
    for (const Slot& slot : *opts.fixed_input) {
      if (slot.vectors.size() != s.slot_roles.size() || slot.attributes.size() != s.attributes) {
        throw Error(ErrorCode::ShapeMismatch, "fixed input slot does not match the spec layout");
      }
      for (const Vec& v : slot.vectors)
        if (v.dim() != s.dim) throw DimensionError(s.dim, v.dim(), "fixed input vector");
    }
  }
  std::vector<const SymmetrySpec*> ordered;
  for (const SymmetrySpec& s : specs) ordered.push_back(&s);
  std::stable_sort(ordered.begin(), ordered.end(), [](const SymmetrySpec* a, const SymmetrySpec* b) {
    return detail::action_rank(a->family) < detail::action_rank(b->family);
  });
  const SymmetrySpec& layout = specs.front();
  const bool has_linear = std::any_of(specs.begin(), specs.end(), [](const SymmetrySpec& s) {
    return s.family != GroupFamily::Permutation && s.family != GroupFamily::Translation;
  });
  const bool lorentz = std::any_of(specs.begin(), specs.end(), [](const SymmetrySpec& s) { return detail::lorentz_type(s.family); });

  std::vector<detail::TrialResult> results(trials);
  parallel_for(trials, opts.threads, [&](std::size_t t) {
    RngState trng = rng.split(t);
    detail::TrialResult& r = results[t];
    r.input = opts.fixed_input ? *opts.fixed_input
                               : detail::sample_input(trng, layout, lorentz && opts.lightlike_trials && t % 2 == 1);
    std::vector<GroupElement> gs;
    for (const SymmetrySpec* s : ordered) {
      const std::size_t size = s->family == GroupFamily::Permutation ? s->slots : s->dim;
      gs.push_back(sample_group(trng, s->family, size, s->rapidity_max));
      r.orientation *= gs.back().orientation();
    }
    try {
      const CertOutput fx = fn(r.input);
      detail::check_output(fx, layout);
      CertInput gx = r.input;
      CertOutput expect = fx;
      for (const GroupElement& g : gs) {
        gx = detail::act_on_input(g, gx, layout.slot_roles);
        expect = detail::act_on_output(g, expect, layout.output, layout.indexing);
      }
      const CertOutput fgx = fn(gx);
      r.residual = detail::output_distance(fgx, expect) / (1.0 + detail::output_norm(fx));
      if (!std::isfinite(r.residual)) throw Error(ErrorCode::NonFinite, "residual is not finite");
    } catch (const std::exception& e) {
      r.failed = true;
      r.message = e.what();
    }
  });

  CertReport report;
  report.trials = trials;
  double sum = 0.0;
  std::size_t ok = 0;
  std::map<std::string, double> sums;
  for (std::size_t t = 0; t < trials; ++t) {
    const detail::TrialResult& r = results[t];
    const std::string key = !has_linear ? "all" : (r.orientation > 0 ? "det=+1" : "det=-1");
    ComponentStats& c = report.components[key];
    ++c.trials;
    if (r.failed) {
      ++c.failures;
      report.failures.push_back({t, r.message, r.input});
      continue;
    }
    ++ok;
    sum += r.residual;
    sums[key] += r.residual;
    c.max_residual = std::max(c.max_residual, r.residual);
    if (ok == 1 || r.residual > report.max_residual) {
      report.max_residual = r.residual;
      report.worst_trial = t;
      report.worst_input = r.input;
    }
  }
  if (ok > 0) report.mean_residual = sum / static_cast<double>(ok);
  for (auto& [key, c] : report.components)
    if (c.trials > c.failures) c.mean_residual = sums[key] / static_cast<double>(c.trials - c.failures);
  return report;
}

inline CertReport certify(const CertFn& fn, const SymmetrySpec& spec, std::size_t trials, const RngState& rng,
                          const CertOptions& opts = {}) {
  return certify_joint(fn, {spec}, trials, rng, opts);
}

// ---------------------------------------------------------------------------
// Adapters
// ---------------------------------------------------------------------------

/// Slots with one vector each, read as a tuple with the spec's role tag.
inline VectorTuple slots_as_tuple(const CertInput& x, Role role) {
  std::vector<Vec> vs;
  for (const Slot& s : x) vs.push_back(s.vectors.at(0));
  return VectorTuple(std::move(vs), std::vector<Role>(vs.size(), role));
}

/// Adds a planted violation of size eps: the output gains eps times a fixed
/// unit direction (vector laws) or eps times the first coordinate of the
/// first input vector (scalar law), neither of which transforms correctly.
inline CertFn planted_violation(CertFn base, OutputLaw law, double eps) {
  return [base = std::move(base), law, eps](const CertInput& x) {
    CertOutput y = base(x);
    if (law == OutputLaw::ScalarInvariant) {
      for (double& s : y.scalars) s += eps * x.at(0).vectors.at(0)[0];
    } else {
      for (Vec& v : y.vectors) {
        std::vector<double> c = v.data();
        c[0] += eps;
        v = Vec(std::move(c));
      }
    }
    return y;
  };
}

}  // namespace equiscalar
