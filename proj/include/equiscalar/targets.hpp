#pragma once

// Built-in certification targets: each bundles a function over CertInput
// slots with the symmetry specs it is expected to satisfy.

#include <set>
#include <string>
#include <vector>

#include "equiscalar/einsum.hpp"
#include "equiscalar/equivariant_basis.hpp"
#include "equiscalar/mpnn.hpp"
#include "equiscalar/physics.hpp"
#include "equiscalar/scalar_features.hpp"
#include "equiscalar/verify.hpp"

namespace equiscalar {

struct Target {
  std::string name;
  CertFn fn;
  std::vector<SymmetrySpec> specs;
  double tolerance = 1e-9;
};

namespace detail {

inline SymmetrySpec layout_spec(GroupFamily f, std::size_t dim, std::size_t slots, std::vector<Role> roles,
                                std::size_t attributes, OutputLaw law, OutputIndexing ix) {
  SymmetrySpec s;
  s.family = f;
  s.dim = dim;
  s.slots = slots;
  s.slot_roles = std::move(roles);
  s.attributes = attributes;
  s.output = law;
  s.indexing = ix;
  return s;
}

/// Slots laid out as [r (position), v (free)] with attributes [mass, charge].
inline std::vector<Particle> slots_as_particles(const CertInput& x) {
  std::vector<Particle> ps;
  for (const Slot& s : x) {
    if (s.vectors.empty()) throw Error(ErrorCode::ShapeMismatch, "particle slot needs a position vector");
    const double mass = s.attributes.empty() ? 1.0 : s.attributes[0];
    const double charge = s.attributes.size() < 2 ? 1.0 : s.attributes[1];
    const Vec v = s.vectors.size() < 2 ? Vec::zeros(s.vectors[0].dim()) : s.vectors[1];
    ps.emplace_back(mass, charge, s.vectors[0], v);
  }
  return ps;
}

}  // namespace detail

/// Every entry of the gram matrix, invariant under O(d) or the Lorentz group.
inline Target gram_target(const Metric& metric, std::size_t n) {
  const GroupFamily f = metric.is_minkowski() ? GroupFamily::Lorentz : GroupFamily::Orthogonal;
  Target t{"gram", {}, {}, metric.is_minkowski() ? 1e-8 : 1e-9};
  t.fn = [kind = metric.kind](const CertInput& x) {
    const VectorTuple v = slots_as_tuple(x, Role::Free);
    const Mat g = gram(Metric::make(kind, v.dim()), v);
    return CertOutput{g.entries(), {}};
  };
  t.specs = {detail::layout_spec(f, metric.dim, n, {Role::Free}, 0, OutputLaw::ScalarInvariant, OutputIndexing::PerPair)};
  return t;
}

/// Total gravitational energy of n particles; slots are [r, v], attributes [mass].
inline Target energy_target(std::size_t n, std::size_t dim = 3) {
  Target t{"energy", {}, {}, 1e-9};
  t.fn = [](const CertInput& x) { return CertOutput{{total_energy(detail::slots_as_particles(x))}, {}}; };
  const std::vector<Role> roles{Role::Position, Role::Free};
  t.specs = {
      detail::layout_spec(GroupFamily::Euclidean, dim, n, roles, 1, OutputLaw::ScalarInvariant, OutputIndexing::Global),
      detail::layout_spec(GroupFamily::Permutation, dim, n, roles, 1, OutputLaw::ScalarInvariant, OutputIndexing::Global),
  };
  return t;
}

/// Per-particle electromagnetic force from all other particles, scalar form.
inline Target emforce_target(std::size_t n) {
  Target t{"emforce", {}, {}, 1e-9};
  t.fn = [](const CertInput& x) {
    const std::vector<Particle> ps = detail::slots_as_particles(x);
    return CertOutput{{}, particle_forces(ps, PhysConstants{})};
  };
  const std::vector<Role> roles{Role::Position, Role::Free};
  const auto spec = [&](GroupFamily f) {
    return detail::layout_spec(f, 3, n, roles, 2, OutputLaw::VectorTranslationInvariant, OutputIndexing::PerSlot);
  };
  t.specs = {spec(GroupFamily::Orthogonal), spec(GroupFamily::Translation), spec(GroupFamily::Permutation)};
  return t;
}

/// An equivariant basis model on n single-vector slots, all tagged `role`.
inline Target basis_target(const EquivariantModel& model, std::size_t n, Role role) {
  Target t{"model:" + model.coeffs.id, {}, {}, detail::lorentz_type(model.family) ? 1e-8 : 1e-9};
  t.fn = [model, role](const CertInput& x) { return CertOutput{{}, {evaluate(model, slots_as_tuple(x, role))}}; };
  const bool invariant = model.family == GroupFamily::Euclidean && model.mode == TranslationMode::Invariant;
  const OutputLaw law = invariant ? OutputLaw::VectorTranslationInvariant : OutputLaw::VectorEquivariant;
  t.specs = {detail::layout_spec(model.family, model.metric.dim, n, {role}, 0, law, OutputIndexing::Global)};
  if (model.permutation_symmetric) {
    t.specs.push_back(
        detail::layout_spec(GroupFamily::Permutation, model.metric.dim, n, {role}, 0, law, OutputIndexing::Global));
  }
  return t;
}

/// Message-passing force model; slots are [r, v] with attributes [mass, charge].
inline Target mpnn_target(const MpnnModel& model, std::size_t n) {
  Target t{"model:mpnn", {}, {}, 1e-9};
  t.fn = [model](const CertInput& x) { return CertOutput{{}, mpnn_forward(model, detail::slots_as_particles(x))}; };
  const std::vector<Role> roles{Role::Position, Role::Free};
  const auto spec = [&](GroupFamily f) {
    return detail::layout_spec(f, 3, n, roles, 2, OutputLaw::VectorTranslationInvariant, OutputIndexing::PerSlot);
  };
  t.specs = {spec(GroupFamily::Orthogonal), spec(GroupFamily::Translation), spec(GroupFamily::Permutation)};
  return t;
}

/// A valid index expression whose tensors are all vectors; the vectors are
/// bound to slots in order of first appearance. A scalar result must be
/// invariant and a one-index result equivariant; expressions with a
/// Levi-Civita factor are checked under rotations only.
inline Target einsum_target(const std::string& source, std::size_t dim = 3) {
  const einsum::IndexExpr expr = einsum::parse(source);
  const Metric metric = Metric::euclidean(dim);
  const einsum::ValidationReport report = einsum::validate(expr, metric, einsum::Mode::Plain);
  if (!report.valid) throw Error(ErrorCode::InvalidArgument, "invalid expression: " + report.violations.front().message);
  if (report.output_order > 1) {
    throw Error(ErrorCode::Unsupported, "certification supports scalar or single-index results, got order " +
                                            std::to_string(report.output_order));
  }
  std::vector<std::string> names;
  bool has_epsilon = false;
  for (const einsum::Term& term : expr.terms)
    for (const einsum::Factor& f : term.factors) {
      if (f.kind == einsum::FactorKind::Epsilon) has_epsilon = true;
      if (f.kind != einsum::FactorKind::Tensor) continue;
      if (f.indices.size() != 1) {
        throw Error(ErrorCode::Unsupported, "tensor '" + f.name + "' has " + std::to_string(f.indices.size()) +
                                                " indices; only vectors can be bound to slots");
      }
      if (std::find(names.begin(), names.end(), f.name) == names.end()) names.push_back(f.name);
    }
  if (names.empty()) throw Error(ErrorCode::InvalidArgument, "expression has no vector factors to bind");
  const bool scalar = report.output_order == 0;
  Target t{"einsum:" + einsum::to_string(expr), {}, {}, 1e-9};
  t.fn = [expr, names, metric, dim, scalar](const CertInput& x) {
    std::map<std::string, einsum::Tensor> bindings;
    for (std::size_t i = 0; i < names.size(); ++i) bindings[names[i]] = einsum::Tensor::from_vec(x[i].vectors.at(0));
    const einsum::Tensor r = einsum::evaluate(expr, bindings, dim, metric);
    if (scalar) return CertOutput{{r.data[0]}, {}};
    return CertOutput{{}, {Vec(r.data)}};
  };
  t.specs = {detail::layout_spec(has_epsilon ? GroupFamily::Rotation : GroupFamily::Orthogonal, dim, names.size(),
                                 {Role::Free}, 0, scalar ? OutputLaw::ScalarInvariant : OutputLaw::VectorEquivariant,
                                 OutputIndexing::Global)};
  return t;
}

}  // namespace equiscalar
