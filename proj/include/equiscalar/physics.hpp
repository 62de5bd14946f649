#pragma once

// Reference physics: Newtonian total energy and the electromagnetic force on
// a moving test charge, the latter in a cross-product form and in a form
// built only from scalar products.

#include <cmath>
#include <string>
#include <vector>

#include "equiscalar/core_types.hpp"
#include "equiscalar/equivariant_basis.hpp"

namespace equiscalar {

struct Particle {
  double mass = 1.0;
  double charge = 0.0;
  Vec r;
  Vec v;

  Particle(double mass_, double charge_, Vec r_, Vec v_)
      : mass(mass_), charge(charge_), r(std::move(r_)), v(std::move(v_)) {
    if (r.dim() != v.dim()) throw DimensionError(r.dim(), v.dim(), "particle velocity");
    detail::require_finite(std::span<const double>(&mass, 1), "mass");
    detail::require_finite(std::span<const double>(&charge, 1), "charge");
  }
};

struct PhysConstants {
  double G = 1.0;
  double k = 1.0;
  double c = 1.0;
};

class CoincidentPositionsError : public Error {
 public:
  CoincidentPositionsError(std::size_t i, std::size_t j)
      : Error(ErrorCode::Degenerate, "particles " + std::to_string(i) + " and " + std::to_string(j) +
                                         " share a position"),
        i_(i),
        j_(j) {}
  [[nodiscard]] std::size_t first() const noexcept { return i_; }
  [[nodiscard]] std::size_t second() const noexcept { return j_; }

 private:
  std::size_t i_, j_;
};

namespace detail {

inline void check_same_dim(const std::vector<Particle>& ps, std::size_t d, const char* what) {
  for (const Particle& p : ps)
    if (p.r.dim() != d) throw DimensionError(d, p.r.dim(), what);
}

inline void check_em_dims(const Particle& test, const std::vector<Particle>& sources) {
  if (test.r.dim() != 3) throw DimensionError(3, test.r.dim(), "electromagnetic force is defined in three dimensions");
  check_same_dim(sources, 3, "electromagnetic source");
}

}  // namespace detail

/// Kinetic energy minus the gravitational double sum over ordered pairs
/// (each unordered pair is counted twice, exactly as the formula is written).
inline double total_energy(const std::vector<Particle>& particles, double G = 1.0) {
  if (particles.empty()) return 0.0;
  detail::check_same_dim(particles, particles.front().r.dim(), "total_energy");
  double kinetic = 0.0;
  for (const Particle& p : particles) kinetic += 0.5 * p.mass * p.v.dot(p.v);
  double potential = 0.0;
  for (std::size_t i = 0; i < particles.size(); ++i)
    for (std::size_t j = 0; j < particles.size(); ++j) {
      if (i == j) continue;
      const double dist = (particles[i].r - particles[j].r).norm();
      if (dist == 0.0) throw CoincidentPositionsError(std::min(i, j), std::max(i, j));
      potential += G * particles[i].mass * particles[j].mass / dist;
    }
  return kinetic - potential;
}

/// Force on test from sources, written with nested cross products.
inline Vec em_force_cross(const Particle& test, const std::vector<Particle>& sources, const PhysConstants& k = {}) {
  detail::check_em_dims(test, sources);
  VecAccumulator f(3);
  for (std::size_t i = 0; i < sources.size(); ++i) {
    const Particle& s = sources[i];
    const Vec delta = test.r - s.r;
    const double dist = delta.norm();
    if (dist == 0.0) throw CoincidentPositionsError(0, i + 1);
    const double scale = k.k * test.charge * s.charge / (dist * dist * dist);
    f.add(scale, delta);
    const Vec inner_cross = generalized_cross({s.v, delta});
    f.add(scale / (k.c * k.c), generalized_cross({test.v, inner_cross}));
  }
  return f.value();
}

/// The same force using only scalar products of the inputs.
inline Vec em_force_scalar(const Particle& test, const std::vector<Particle>& sources, const PhysConstants& k = {}) {
  detail::check_em_dims(test, sources);
  const double c2 = k.c * k.c;
  VecAccumulator f(3);
  for (std::size_t i = 0; i < sources.size(); ++i) {
    const Particle& s = sources[i];
    const Vec delta = test.r - s.r;
    const double dist = delta.norm();
    if (dist == 0.0) throw CoincidentPositionsError(0, i + 1);
    const double scale = k.k * test.charge * s.charge / (dist * dist * dist);
    f.add(scale * (1.0 - test.v.dot(s.v) / c2), delta);
    f.add(scale * test.v.dot(delta) / c2, s.v);
  }
  return f.value();
}

/// Max-norm of a x (b x c) - [(a.c) b - (a.b) c].
inline double triple_product_check(const Vec& a, const Vec& b, const Vec& c) {
  if (a.dim() != 3 || b.dim() != 3 || c.dim() != 3) throw Error(ErrorCode::DimensionMismatch, "triple product needs three vectors in R^3");
  const Vec lhs = generalized_cross({a, generalized_cross({b, c})});
  const Vec rhs = a.dot(c) * b - a.dot(b) * c;
  return (lhs - rhs).max_abs();
}

}  // namespace equiscalar
