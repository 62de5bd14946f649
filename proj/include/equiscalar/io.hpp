#pragma once

// JSON and CSV conversions for tuples, particles, features, group elements,
// models, certification specs and reports.

#include <charconv>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "equiscalar/einsum.hpp"
#include "equiscalar/equivariant_basis.hpp"
#include "equiscalar/mpnn.hpp"
#include "equiscalar/scalar_features.hpp"
#include "equiscalar/verify.hpp"

namespace equiscalar::io {

using Json = nlohmann::ordered_json;

namespace detail {

[[noreturn]] inline void bad(const std::string& what) { throw Error(ErrorCode::Io, what); }

inline const Json& field(const Json& j, const char* key, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) bad(where + ": missing field '" + key + "'");
  return j.at(key);
}

inline double number(const Json& j, const std::string& where) {
  if (!j.is_number()) bad(where + ": expected a number");
  return j.get<double>();
}

inline std::size_t count(const Json& j, const std::string& where) {
  if (!j.is_number_unsigned()) bad(where + ": expected a non-negative integer");
  return j.get<std::size_t>();
}

inline Vec vec(const Json& j, const std::string& where) {
  if (!j.is_array() || j.empty()) bad(where + ": expected a non-empty array of numbers");
  std::vector<double> c;
  for (std::size_t i = 0; i < j.size(); ++i) c.push_back(number(j[i], where + "[" + std::to_string(i) + "]"));
  return Vec(std::move(c));
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

}  // namespace detail

/// Shortest text that reads back to the same double.
inline std::string format_double(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) detail::bad("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) detail::bad("cannot write '" + path + "'");
  out << text;
}

inline Json parse_json(const std::string& text, const std::string& where) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    detail::bad(where + ": " + e.what());
  }
}

inline Json load_json(const std::string& path) { return parse_json(read_file(path), path); }

inline Json to_json(const Vec& v) { return Json(v.data()); }

inline Json to_json(const Mat& m) {
  Json rows = Json::array();
  for (std::size_t i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (std::size_t j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Tuples and particles
// ---------------------------------------------------------------------------

inline Role parse_role(const std::string& s) {
  if (s == "position" || s == "p") return Role::Position;
  if (s == "free" || s == "f") return Role::Free;
  detail::bad("unknown role '" + s + "' (expected position or free)");
}

inline Json to_json(const VectorTuple& x) {
  Json vs = Json::array(), rs = Json::array();
  for (std::size_t i = 0; i < x.size(); ++i) {
    vs.push_back(to_json(x[i]));
    rs.push_back(to_string(x.role(i)));
  }
  return Json{{"d", x.dim()}, {"vectors", vs}, {"roles", rs}};
}

/// {"d": int, "vectors": [[...], ...], "roles": [...]}; roles default to free.
inline VectorTuple tuple_from_json(const Json& j) {
  const std::size_t d = detail::count(detail::field(j, "d", "tuple"), "tuple.d");
  const Json& vs = detail::field(j, "vectors", "tuple");
  if (!vs.is_array()) detail::bad("tuple.vectors: expected an array");
  if (vs.empty()) return VectorTuple::empty(d);
  std::vector<Vec> vectors;
  for (std::size_t i = 0; i < vs.size(); ++i) {
    vectors.push_back(detail::vec(vs[i], "tuple.vectors[" + std::to_string(i) + "]"));
    if (vectors.back().dim() != d) throw DimensionError(d, vectors.back().dim(), "tuple vector " + std::to_string(i));
  }
  std::vector<Role> roles(vectors.size(), Role::Free);
  if (j.contains("roles")) {
    const Json& rs = j.at("roles");
    if (!rs.is_array() || rs.size() != vectors.size()) detail::bad("tuple.roles: expected one role per vector");
    for (std::size_t i = 0; i < rs.size(); ++i) {
      if (!rs[i].is_string()) detail::bad("tuple.roles: expected strings");
      roles[i] = parse_role(rs[i].get<std::string>());
    }
  }
  return VectorTuple(std::move(vectors), std::move(roles));
}

/// One vector per row; an optional "#roles: p,p,f" comment line tags them.
inline VectorTuple tuple_from_csv(const std::string& text) {
  std::vector<Vec> vectors;
  std::vector<Role> roles;
  bool have_roles = false;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = detail::trim(line);
    if (line.empty()) continue;
    if (line[0] == '#') {
      const std::string body = detail::trim(line.substr(1));
      if (body.rfind("roles:", 0) == 0) {
        for (const std::string& r : detail::split(body.substr(6), ',')) roles.push_back(parse_role(detail::trim(r)));
        have_roles = true;
      }
      continue;
    }
    std::vector<double> c;
    for (const std::string& cell : detail::split(line, ',')) {
      try {
        std::size_t used = 0;
        const std::string t = detail::trim(cell);
        c.push_back(std::stod(t, &used));
        if (used != t.size()) throw std::invalid_argument(t);
      } catch (const std::logic_error&) {
        detail::bad("csv line " + std::to_string(lineno) + ": '" + cell + "' is not a number");
      }
    }
    vectors.emplace_back(std::move(c));
  }
  if (vectors.empty()) detail::bad("csv tuple has no rows");
  if (!have_roles) roles.assign(vectors.size(), Role::Free);
  if (roles.size() != vectors.size()) {
    detail::bad("csv roles line lists " + std::to_string(roles.size()) + " roles for " + std::to_string(vectors.size()) +
                " vectors");
  }
  return VectorTuple(std::move(vectors), std::move(roles));
}

inline VectorTuple load_tuple(const std::string& path) {
  if (path.size() >= 4 && path.substr(path.size() - 4) == ".csv") return tuple_from_csv(read_file(path));
  return tuple_from_json(load_json(path));
}

inline Json to_json(const Particle& p) {
  return Json{{"mass", p.mass}, {"charge", p.charge}, {"r", to_json(p.r)}, {"v", to_json(p.v)}};
}

/// {"particles": [{"mass", "charge", "r", "v"}, ...]}; mass defaults to 1,
/// charge to 0 and v to zero.
inline std::vector<Particle> particles_from_json(const Json& j) {
  const Json& arr = detail::field(j, "particles", "particles file");
  if (!arr.is_array()) detail::bad("particles: expected an array");
  std::vector<Particle> ps;
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const std::string where = "particles[" + std::to_string(i) + "]";
    const Vec r = detail::vec(detail::field(arr[i], "r", where), where + ".r");
    const Vec v = arr[i].contains("v") ? detail::vec(arr[i].at("v"), where + ".v") : Vec::zeros(r.dim());
    const double m = arr[i].contains("mass") ? detail::number(arr[i].at("mass"), where + ".mass") : 1.0;
    const double q = arr[i].contains("charge") ? detail::number(arr[i].at("charge"), where + ".charge") : 0.0;
    ps.emplace_back(m, q, r, v);
  }
  return ps;
}

// ---------------------------------------------------------------------------
// Features and group elements
// ---------------------------------------------------------------------------

inline Json to_json(const ScalarFeatureSet& f) {
  Json j{{"metric", to_string(f.metric.kind)}, {"dim", f.metric.dim}, {"n", f.n()}, {"gram", f.gram.entries()}};
  if (f.subdets) {
    Json s = Json::array();
    for (const Subdeterminant& d : *f.subdets) s.push_back(Json{{"indices", d.indices}, {"value", d.value}});
    j["subdets"] = s;
  }
  if (f.omega) {
    Json o = Json::array();
    for (const OmegaEntry& e : f.omega->entries) o.push_back(Json{{"row", e.row}, {"col", e.col}, {"value", e.value}});
    j["omega"] = Json{{"d", f.omega->d}, {"entries", o}};
  }
  return j;
}

inline Json to_json(const GroupElement& g) {
  Json j{{"family", to_string(g.family())}, {"dim", g.dim()}};
  if (const auto q = g.linear_part()) {
    j["matrix"] = to_json(*q);
    j["det"] = determinant(*q);
  }
  if (const auto w = g.translation_part()) j["translation"] = to_json(*w);
  if (const auto* s = g.permutation_part()) j["permutation"] = *s;
  return j;
}

inline GroupFamily parse_family(const std::string& s) {
  for (GroupFamily f : {GroupFamily::Orthogonal, GroupFamily::Rotation, GroupFamily::Lorentz, GroupFamily::Translation,
                        GroupFamily::Permutation, GroupFamily::Euclidean, GroupFamily::Poincare})
    if (s == to_string(f)) return f;
  if (s == "o") return GroupFamily::Orthogonal;
  if (s == "so") return GroupFamily::Rotation;
  if (s == "t") return GroupFamily::Translation;
  if (s == "perm") return GroupFamily::Permutation;
  if (s == "e") return GroupFamily::Euclidean;
  throw Error(ErrorCode::InvalidArgument, "unknown group family '" + s + "'");
}

inline Metric parse_metric(const std::string& kind, std::size_t dim) {
  if (kind == "euclid" || kind == "euclidean") return Metric::euclidean(dim);
  if (kind == "minkowski") return Metric::minkowski(dim);
  throw Error(ErrorCode::InvalidArgument, "unknown metric '" + kind + "' (expected euclid or minkowski)");
}

// ---------------------------------------------------------------------------
// Models
// ---------------------------------------------------------------------------

/// Basis models reference a coefficient function by registry id.
inline Json to_json(const EquivariantModel& m) {
  return Json{{"kind", "basis"},
              {"family", to_string(m.family)},
              {"metric", Json{{"kind", to_string(m.metric.kind)}, {"dim", m.metric.dim}}},
              {"coefficients", m.coeffs.id},
              {"permutation_symmetric", m.permutation_symmetric},
              {"translation", m.mode == TranslationMode::Invariant ? "invariant" : "equivariant"}};
}

inline EquivariantModel basis_model_from_json(const Json& j) {
  EquivariantModel m;
  m.family = parse_family(detail::field(j, "family", "model").get<std::string>());
  const Json& mj = detail::field(j, "metric", "model");
  m.metric = parse_metric(detail::field(mj, "kind", "model.metric").get<std::string>(),
                          detail::count(detail::field(mj, "dim", "model.metric"), "model.metric.dim"));
  m.coeffs = fixtures::lookup(detail::field(j, "coefficients", "model").get<std::string>());
  m.permutation_symmetric = j.value("permutation_symmetric", false);
  const std::string mode = j.value("translation", std::string("equivariant"));
  if (mode != "invariant" && mode != "equivariant") detail::bad("model.translation: expected invariant or equivariant");
  m.mode = mode == "invariant" ? TranslationMode::Invariant : TranslationMode::Equivariant;
  return m;
}

inline Json to_json(const MpnnModel& m) {
  const MpnnConfig& c = m.config();
  Json nets = Json::array();
  for (const ScalarNet& n : m.nets()) nets.push_back(n.params());
  return Json{{"kind", "mpnn"},
              {"n_particles", c.n_particles},
              {"layers", c.layers},
              {"widths", c.widths},
              {"activation", to_string(c.activation)},
              {"edges", Json{{"inverse_distance", c.edges.inverse_distance},
                             {"rbf_count", c.edges.rbf_count},
                             {"rbf_max", c.edges.rbf_max},
                             {"rbf_width", c.edges.rbf_width}}},
              {"input", c.input == MessageInput::FullConcat ? "full-concat" : "pooled"},
              {"readout", c.readout == Readout::PositionChannel ? "position" : "velocity"},
              {"nets", nets}};
}

inline MpnnModel mpnn_model_from_json(const Json& j) {
  MpnnConfig c;
  c.n_particles = detail::count(detail::field(j, "n_particles", "model"), "model.n_particles");
  c.layers = detail::count(detail::field(j, "layers", "model"), "model.layers");
  c.widths.clear();
  for (const Json& w : detail::field(j, "widths", "model")) c.widths.push_back(detail::count(w, "model.widths"));
  c.activation = parse_activation(detail::field(j, "activation", "model").get<std::string>());
  const Json& e = detail::field(j, "edges", "model");
  c.edges.inverse_distance = e.value("inverse_distance", false);
  c.edges.rbf_count = e.value("rbf_count", std::size_t{0});
  c.edges.rbf_max = e.value("rbf_max", c.edges.rbf_max);
  c.edges.rbf_width = e.value("rbf_width", c.edges.rbf_width);
  const std::string input = j.value("input", std::string("full-concat"));
  if (input != "full-concat" && input != "pooled") detail::bad("model.input: expected full-concat or pooled");
  c.input = input == "pooled" ? MessageInput::Pooled : MessageInput::FullConcat;
  const std::string readout = j.value("readout", std::string("position"));
  if (readout != "position" && readout != "velocity") detail::bad("model.readout: expected position or velocity");
  c.readout = readout == "velocity" ? Readout::VelocityChannel : Readout::PositionChannel;
  MpnnModel m(c);
  const Json& nets = detail::field(j, "nets", "model");
  if (!nets.is_array() || nets.size() != m.nets().size()) {
    detail::bad("model.nets: expected " + std::to_string(m.nets().size()) + " weight arrays");
  }
  for (std::size_t k = 0; k < nets.size(); ++k) {
    std::vector<double>& p = m.nets()[k].params();
    if (!nets[k].is_array() || nets[k].size() != p.size()) {
      detail::bad("model.nets[" + std::to_string(k) + "]: expected " + std::to_string(p.size()) + " weights");
    }
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = detail::number(nets[k][i], "model.nets");
  }
  return m;
}

// ---------------------------------------------------------------------------
// Certification
// ---------------------------------------------------------------------------

inline OutputLaw parse_output_law(const std::string& s) {
  for (OutputLaw o : {OutputLaw::ScalarInvariant, OutputLaw::VectorEquivariant, OutputLaw::VectorTranslationInvariant,
                      OutputLaw::PseudoVector})
    if (s == to_string(o)) return o;
  detail::bad("unknown output law '" + s + "'");
}

inline OutputIndexing parse_indexing(const std::string& s) {
  for (OutputIndexing o : {OutputIndexing::Global, OutputIndexing::PerSlot, OutputIndexing::PerPair})
    if (s == to_string(o)) return o;
  detail::bad("unknown output indexing '" + s + "'");
}

inline Json to_json(const SymmetrySpec& s) {
  std::vector<std::string> roles;
  for (Role r : s.slot_roles) roles.emplace_back(to_string(r));
  return Json{{"family", to_string(s.family)}, {"dim", s.dim},
              {"slots", s.slots},             {"slot_roles", roles},
              {"attributes", s.attributes},   {"output", to_string(s.output)},
              {"indexing", to_string(s.indexing)}, {"rapidity_max", s.rapidity_max}};
}

/// A spec file holds {"groups": [spec, ...]} or a single spec object. Fields
/// missing from a spec are taken from `defaults`.
inline std::vector<SymmetrySpec> specs_from_json(const Json& j, const SymmetrySpec& defaults) {
  const auto one = [&](const Json& o) {
    if (!o.is_object()) detail::bad("spec: expected an object");
    SymmetrySpec s = defaults;
    if (o.contains("family")) s.family = parse_family(o.at("family").get<std::string>());
    if (o.contains("dim")) s.dim = detail::count(o.at("dim"), "spec.dim");
    if (o.contains("slots")) s.slots = detail::count(o.at("slots"), "spec.slots");
    if (o.contains("slot_roles")) {
      s.slot_roles.clear();
      for (const Json& r : o.at("slot_roles")) s.slot_roles.push_back(parse_role(r.get<std::string>()));
    }
    if (o.contains("attributes")) s.attributes = detail::count(o.at("attributes"), "spec.attributes");
    if (o.contains("output")) s.output = parse_output_law(o.at("output").get<std::string>());
    if (o.contains("indexing")) s.indexing = parse_indexing(o.at("indexing").get<std::string>());
    if (o.contains("rapidity_max")) s.rapidity_max = detail::number(o.at("rapidity_max"), "spec.rapidity_max");
    return s;
  };
  std::vector<SymmetrySpec> out;
  if (j.is_object() && j.contains("groups")) {
    for (const Json& g : j.at("groups")) out.push_back(one(g));
  } else {
    out.push_back(one(j));
  }
  if (out.empty()) detail::bad("spec: no groups listed");
  return out;
}

inline Json to_json(const CertInput& x) {
  Json slots = Json::array();
  for (const Slot& s : x) {
    Json vs = Json::array();
    for (const Vec& v : s.vectors) vs.push_back(to_json(v));
    slots.push_back(Json{{"vectors", vs}, {"attributes", s.attributes}});
  }
  return slots;
}

inline Json to_json(const CertReport& r, double tolerance) {
  Json comps = Json::object();
  for (const auto& [key, c] : r.components) {
    comps[key] = Json{{"trials", c.trials},
                      {"failures", c.failures},
                      {"max_residual", c.max_residual},
                      {"mean_residual", c.mean_residual}};
  }
  Json fails = Json::array();
  for (const TrialFailure& f : r.failures)
    fails.push_back(Json{{"trial", f.trial}, {"message", f.message}, {"input", to_json(f.input)}});
  return Json{{"passed", r.passed(tolerance)},
              {"tolerance", tolerance},
              {"trials", r.trials},
              {"max_residual", r.max_residual},
              {"mean_residual", r.mean_residual},
              {"worst_trial", r.worst_trial},
              {"worst_input", to_json(r.worst_input)},
              {"components", comps},
              {"failures", fails}};
}

// ---------------------------------------------------------------------------
// Einsum
// ---------------------------------------------------------------------------

inline Json to_json(const einsum::ValidationReport& r) {
  Json vs = Json::array();
  for (const einsum::Violation& v : r.violations)
    vs.push_back(Json{{"rule", v.rule}, {"message", v.message}, {"positions", v.positions}});
  return Json{{"valid", r.valid},
              {"free_indices", std::string(r.free_indices.begin(), r.free_indices.end())},
              {"output_order", r.output_order},
              {"violations", vs}};
}

inline Json to_json(const einsum::Tensor& t) { return Json{{"shape", t.shape}, {"data", t.data}}; }

/// Bindings map names to numbers, vectors or row-major nested arrays.
inline std::map<std::string, einsum::Tensor> bindings_from_json(const Json& j) {
  if (!j.is_object()) detail::bad("bindings: expected an object of name -> array");
  std::map<std::string, einsum::Tensor> out;
  for (const auto& [name, value] : j.items()) {
    einsum::Tensor t;
    std::vector<const Json*> level{&value};
    while (level.front()->is_array()) {
      const std::size_t len = level.front()->size();
      if (len == 0) detail::bad("bindings." + name + ": empty axis");
      std::vector<const Json*> next;
      for (const Json* e : level) {
        if (!e->is_array() || e->size() != len) detail::bad("bindings." + name + ": ragged array");
        for (const Json& c : *e) next.push_back(&c);
      }
      t.shape.push_back(len);
      level = std::move(next);
    }
    for (const Json* e : level) t.data.push_back(detail::number(*e, "bindings." + name));
    out.emplace(name, std::move(t));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

inline std::string report_csv(const TrainReport& r) {
  std::ostringstream out;
  out << "epoch,train_mse,val_mse,equivariance_residual\n";
  for (const EpochRow& row : r.rows) {
    out << row.epoch << ',' << format_double(row.train_mse) << ',' << format_double(row.val_mse) << ','
        << format_double(row.equivariance_residual) << '\n';
  }
  return out.str();
}

}  // namespace equiscalar::io
