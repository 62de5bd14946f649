#pragma once

// Nested-loop einsum oracle shared by the unit and acceptance suites.

#include <map>
#include <string>
#include <vector>

#include "equiscalar/einsum.hpp"
#include "test_support.hpp"

namespace equiscalar::testing {

using Bindings = std::map<std::string, einsum::Tensor>;

// Outer product of every factor over every index occurrence, then keep the
// entries where repeated labels agree. Shares no code with evaluate().
inline einsum::Tensor oracle(const einsum::IndexExpr& e, const Bindings& b, std::size_t d, const Metric& m) {
  std::vector<char> free;
  {
    std::map<char, int> count;
    for (const einsum::Factor& f : e.terms[0].factors)
      for (const einsum::Index& i : f.indices) ++count[i.label];
    for (const einsum::Factor& f : e.terms[0].factors)
      for (const einsum::Index& i : f.indices)
        if (count[i.label] == 1) free.push_back(i.label);
  }
  std::size_t total = 1;
  for (std::size_t a = 0; a < free.size(); ++a) total *= d;
  einsum::Tensor out{std::vector<std::size_t>(free.size(), d), std::vector<double>(total, 0.0)};
  for (const einsum::Term& t : e.terms) {
    std::vector<const einsum::Index*> occ;
    std::vector<std::size_t> owner;
    for (std::size_t f = 0; f < t.factors.size(); ++f)
      for (const einsum::Index& i : t.factors[f].indices) {
        occ.push_back(&i);
        owner.push_back(f);
      }
    std::size_t combos = 1;
    for (std::size_t k = 0; k < occ.size(); ++k) combos *= d;
    for (std::size_t code = 0; code < combos; ++code) {
      std::vector<std::size_t> val(occ.size());
      std::size_t c = code;
      for (std::size_t k = 0; k < occ.size(); ++k) {
        val[k] = c % d;
        c /= d;
      }
      bool consistent = true;
      for (std::size_t p = 0; p < occ.size() && consistent; ++p)
        for (std::size_t q = p + 1; q < occ.size(); ++q)
          if (occ[p]->label == occ[q]->label && val[p] != val[q]) consistent = false;
      if (!consistent) continue;
      double prod = t.sign;
      std::size_t k = 0;
      for (const einsum::Factor& f : t.factors) {
        std::vector<std::size_t> idx(val.begin() + static_cast<long>(k), val.begin() + static_cast<long>(k + f.indices.size()));
        k += f.indices.size();
        if (f.kind == einsum::FactorKind::Delta) {
          prod *= idx[0] == idx[1];
        } else if (f.kind == einsum::FactorKind::Epsilon) {
          int inversions = 0;
          bool repeat = false;
          for (std::size_t a = 0; a < idx.size(); ++a)
            for (std::size_t b2 = a + 1; b2 < idx.size(); ++b2) {
              repeat |= idx[a] == idx[b2];
              inversions += idx[a] > idx[b2];
            }
          prod *= repeat ? 0.0 : (inversions % 2 ? -1.0 : 1.0);
        } else {
          const einsum::Tensor& tb = b.at(f.name);
          std::size_t flat = 0;
          for (std::size_t a = 0; a < idx.size(); ++a) flat = flat * d + idx[a];
          prod *= tb.data[flat];
          for (std::size_t a = 0; a < idx.size(); ++a)
            if (f.indices[a].variance == einsum::Variance::Upper) prod *= m.signature(idx[a]);
        }
      }
      std::size_t flat = 0;
      for (char label : free)
        for (std::size_t p = 0; p < occ.size(); ++p)
          if (occ[p]->label == label) {
            flat = flat * d + val[p];
            break;
          }
      out.data[flat] += prod;
    }
  }
  return out;
}

inline Bindings random_bindings(RngState& rng, std::size_t d) {
  Bindings b;
  for (const char* name : {"u", "v", "w", "x", "z"}) b[name] = einsum::Tensor::from_vec(random_vec(rng, d));
  std::vector<double> t(d * d);
  for (double& e : t) e = rng.normal();
  b["T"] = einsum::Tensor{{d, d}, t};
  return b;
}

}  // namespace equiscalar::testing
