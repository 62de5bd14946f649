// Command-line front end. Structured output goes to stdout as JSON,
// diagnostics to stderr. Exit codes: 0 success, 1 validation or
// certification failure, 2 usage or input error.

#include <CLI11.hpp>

#include <cstdint>
#include <functional>
#include <iostream>
#include <optional>
#include <string>

#include "equiscalar/equiscalar.hpp"

using namespace equiscalar;
using io::Json;

namespace {

constexpr int kOk = 0;
constexpr int kFailed = 1;
constexpr int kUsage = 2;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::uint64_t require_seed(const std::optional<std::uint64_t>& seed, const std::string& command) {
  if (!seed) throw UsageError(command + " is randomized and needs an explicit --seed");
  return *seed;
}

void emit(const Json& j, const std::string& out_path) {
  const std::string text = j.dump(2) + "\n";
  if (out_path.empty()) {
    std::cout << text;
  } else {
    io::write_file(out_path, text);
  }
}

const char* kSchemas = R"(JSON schemas:
  tuple        {"d": 3, "vectors": [[1,0,0], ...], "roles": ["position"|"free", ...]}
               CSV alternative: one vector per row, optional "#roles: p,p,f" line
  particles    {"particles": [{"mass": 1, "charge": 1, "r": [..], "v": [..]}, ...]}
  features     {"metric", "dim", "n", "gram": [row-major], "subdets": [{"indices", "value"}],
                "omega": {"d", "entries": [{"row", "col", "value"}]}}
  group        {"family", "dim", "matrix": [[..]], "det", "translation": [..], "permutation": [..]}
  bindings     {"u": [1,2,3], "M": [[..],[..]], "s": 2.5}
  spec         {"groups": [{"family", "dim", "slots", "slot_roles", "attributes",
                "output": scalar-invariant|vector-equivariant|vector-translation-invariant|pseudo-vector,
                "indexing": global|per-slot|per-pair, "rapidity_max"}]}; omitted fields keep the target's defaults
  model        {"kind": "mpnn", "n_particles", "layers", "widths", "activation", "edges", "input", "readout", "nets"}
               {"kind": "basis", "family", "metric": {"kind", "dim"}, "coefficients": fixture id,
                "permutation_symmetric", "translation": invariant|equivariant}
  report       {"passed", "tolerance", "trials", "max_residual", "mean_residual", "worst_trial",
                "worst_input", "components": {"det=+1": {...}, "det=-1": {...}}, "failures"}
Config files (train --config): key = value lines, # comments; keys n_particles, n_samples,
  layers (or T), widths = [16, 16], activation, lr, epochs, batch, seed, edge_channels,
  input, val_fraction, threads, data_seed, init_seed.)";

// ---------------------------------------------------------------------------
// features
// ---------------------------------------------------------------------------

struct FeaturesArgs {
  std::string metric = "euclid";
  bool subdets = false;
  std::optional<std::size_t> omega;
  std::string in, out, format = "json";
};

int run_features(const FeaturesArgs& a) {
  const VectorTuple x = io::load_tuple(a.in);
  const Metric metric = io::parse_metric(a.metric, x.dim());
  FeatureOptions opts;
  opts.subdets = a.subdets;
  opts.omega_d = a.omega;
  const ScalarFeatureSet f = compute_features(metric, x, opts);
  if (a.format == "csv") {
    std::ostringstream s;
    for (std::size_t i = 0; i < f.n(); ++i)
      for (std::size_t j = 0; j < f.n(); ++j) s << io::format_double(f.gram(i, j)) << (j + 1 == f.n() ? "\n" : ",");
    if (a.out.empty()) {
      std::cout << s.str();
    } else {
      io::write_file(a.out, s.str());
    }
    return kOk;
  }
  emit(io::to_json(f), a.out);
  return kOk;
}

// ---------------------------------------------------------------------------
// sample-group
// ---------------------------------------------------------------------------

struct SampleArgs {
  std::string group;
  std::size_t dim = 3;
  std::optional<std::uint64_t> seed;
  double rapidity_max = kDefaultRapidityMax;
};

int run_sample(const SampleArgs& a) {
  RngState rng(require_seed(a.seed, "sample-group"));
  const GroupFamily f = io::parse_family(a.group);
  emit(io::to_json(sample_group(rng, f, a.dim, a.rapidity_max)), "");
  return kOk;
}

// ---------------------------------------------------------------------------
// demo
// ---------------------------------------------------------------------------

struct DemoArgs {
  std::string which, in;
  std::size_t check = 0;
  std::optional<std::uint64_t> seed;
  std::optional<double> tolerance;
  std::size_t threads = 1;
};

CertInput particles_as_input(const std::vector<Particle>& ps, bool with_charge) {
  CertInput x;
  for (const Particle& p : ps) {
    Slot s{{p.r, p.v}, {p.mass}};
    if (with_charge) s.attributes.push_back(p.charge);
    x.push_back(std::move(s));
  }
  return x;
}

int run_demo(const DemoArgs& a) {
  const std::vector<Particle> ps = io::particles_from_json(io::load_json(a.in));
  if (ps.empty()) throw Error(ErrorCode::InvalidArgument, "particles file lists no particles");
  Json out;
  Target target;
  if (a.which == "energy") {
    out["energy"] = total_energy(ps);
    target = energy_target(ps.size(), ps.front().r.dim());
  } else {
    if (ps.size() < 2) throw Error(ErrorCode::InvalidArgument, "emforce needs at least two particles");
    Json forces = Json::array();
    double disagreement = 0.0;
    for (std::size_t i = 0; i < ps.size(); ++i) {
      std::vector<Particle> others;
      for (std::size_t j = 0; j < ps.size(); ++j)
        if (j != i) others.push_back(ps[j]);
      const Vec fs = em_force_scalar(ps[i], others);
      const Vec fc = em_force_cross(ps[i], others);
      disagreement = std::max(disagreement, (fs - fc).norm() / std::max(fc.norm(), 1e-300));
      forces.push_back(Json{{"scalar_form", io::to_json(fs)}, {"cross_form", io::to_json(fc)}});
    }
    out["forces"] = forces;
    out["max_relative_disagreement"] = disagreement;
    target = emforce_target(ps.size());
  }
  int code = kOk;
  if (a.check > 0) {
    const double tol = a.tolerance.value_or(target.tolerance);
    CertOptions opts;
    opts.threads = a.threads;
    opts.fixed_input = particles_as_input(ps, a.which == "emforce");
    const CertReport r = certify_joint(target.fn, target.specs, a.check, RngState(require_seed(a.seed, "demo --check-equivariance")), opts);
    Json groups = Json::array();
    for (const SymmetrySpec& s : target.specs) groups.push_back(to_string(s.family));
    out["equivariance"] = io::to_json(r, tol);
    out["equivariance"]["groups"] = groups;
    if (!r.passed(tol)) code = kFailed;
  }
  emit(out, "");
  return code;
}

// ---------------------------------------------------------------------------
// einsum
// ---------------------------------------------------------------------------

struct EinsumArgs {
  std::string expr, metric = "euclid", mode = "plain", bind;
  std::size_t dim = 3;
};

int run_einsum_check(const EinsumArgs& a) {
  if (a.mode != "plain" && a.mode != "metric-aware") throw UsageError("--mode must be plain or metric-aware");
  const Metric metric = io::parse_metric(a.metric, std::max<std::size_t>(a.dim, 2));
  Json out{{"expression", a.expr}};
  try {
    const einsum::IndexExpr e = einsum::parse(a.expr);
    const einsum::ValidationReport r =
        einsum::validate(e, metric, a.mode == "metric-aware" ? einsum::Mode::MetricAware : einsum::Mode::Plain);
    out["canonical"] = einsum::to_string(e);
    out.update(io::to_json(r));
    emit(out, "");
    return r.valid ? kOk : kFailed;
  } catch (const einsum::ParseError& e) {
    out["valid"] = false;
    out["violations"] = Json::array({Json{{"rule", "syntax"}, {"message", e.what()}, {"positions", {e.offset()}}}});
    emit(out, "");
    return kFailed;
  }
}

int run_einsum_eval(const EinsumArgs& a) {
  if (a.bind.empty()) throw UsageError("einsum eval needs --bind bindings.json");
  const Metric metric = io::parse_metric(a.metric, a.dim);
  const einsum::IndexExpr e = einsum::parse(a.expr);
  const einsum::Tensor t = einsum::evaluate(e, io::bindings_from_json(io::load_json(a.bind)), a.dim, metric);
  const einsum::ValidationReport r = einsum::validate(e, metric, einsum::Mode::Plain);
  Json out = io::to_json(t);
  out["free_indices"] = std::string(r.free_indices.begin(), r.free_indices.end());
  emit(out, "");
  return kOk;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string config, out, report;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads;
};

int run_train(const TrainArgs& a) {
  KeyValueConfig kv = KeyValueConfig::parse(io::read_file(a.config), a.config);
  if (!kv.has("seed") && !a.seed) throw UsageError("train needs a seed (config key 'seed' or --seed)");
  if (a.seed) {
    std::string text = io::read_file(a.config);
    kv = KeyValueConfig::parse(text + "\nseed = " + std::to_string(*a.seed) + "\n", a.config);
  }
  TrainSetup setup = train_setup(kv);
  if (a.threads) setup.train.threads = *a.threads;
  RngState data_rng(setup.data_seed), init_rng(setup.init_seed);
  const std::vector<MpnnSample> data = generate_dataset(data_rng, setup.n_particles, setup.n_samples);
  MpnnModel model = MpnnModel::random(setup.model, init_rng);
  const TrainReport r = train(model, data, setup.train);
  if (!a.out.empty()) io::write_file(a.out, io::to_json(model).dump() + "\n");
  if (!a.report.empty()) io::write_file(a.report, io::report_csv(r));
  const EpochRow& first = r.rows.front();
  const EpochRow& last = r.rows.back();
  Json out{{"epochs_run", last.epoch},
           {"diverged", r.diverged},
           {"message", r.message},
           {"train_size", r.train_size},
           {"val_size", r.val_size},
           {"parameters", model.parameter_count()},
           {"initial_val_mse", first.val_mse},
           {"final_val_mse", last.val_mse},
           {"val_ratio", first.val_mse > 0 ? last.val_mse / first.val_mse : 0.0},
           {"final_equivariance_residual", last.equivariance_residual}};
  emit(out, "");
  return r.diverged ? kFailed : kOk;
}

// ---------------------------------------------------------------------------
// certify
// ---------------------------------------------------------------------------

struct CertifyArgs {
  std::string target, spec, out;
  std::size_t trials = 1000;
  std::optional<std::uint64_t> seed;
  std::optional<double> tolerance;
  std::size_t threads = 1;
  std::size_t slots = 0;
};

Target make_target(const std::string& name, std::size_t slots) {
  const auto n_or = [&](std::size_t dflt) { return slots ? slots : dflt; };
  if (name == "gram") return gram_target(Metric::euclidean(3), n_or(4));
  if (name == "energy") return energy_target(n_or(4));
  if (name == "emforce") return emforce_target(n_or(4));
  if (name.rfind("einsum:", 0) == 0) return einsum_target(name.substr(7));
  if (name.rfind("model:", 0) == 0) {
    const Json j = io::load_json(name.substr(6));
    const std::string kind = j.value("kind", std::string());
    if (kind == "mpnn") {
      const MpnnModel m = io::mpnn_model_from_json(j);
      return mpnn_target(m, n_or(m.config().n_particles));
    }
    if (kind == "basis") {
      const EquivariantModel m = io::basis_model_from_json(j);
      const bool positions = m.family == GroupFamily::Euclidean || m.family == GroupFamily::Poincare;
      return basis_target(m, n_or(3), positions ? Role::Position : Role::Free);
    }
    throw Error(ErrorCode::Io, "model file kind must be \"mpnn\" or \"basis\"");
  }
  throw UsageError("unknown target '" + name + "' (gram, energy, emforce, model:FILE, einsum:EXPR)");
}

int run_certify(const CertifyArgs& a) {
  const std::uint64_t seed = require_seed(a.seed, "certify");
  Target t = make_target(a.target, a.slots);
  if (!a.spec.empty()) t.specs = io::specs_from_json(io::load_json(a.spec), t.specs.front());
  const double tol = a.tolerance.value_or(t.tolerance);
  CertOptions opts;
  opts.threads = a.threads;
  const CertReport r = certify_joint(t.fn, t.specs, a.trials, RngState(seed), opts);
  Json out{{"target", t.name}, {"seed", seed}};
  Json specs = Json::array();
  for (const SymmetrySpec& s : t.specs) specs.push_back(io::to_json(s));
  out["specs"] = specs;
  out.update(io::to_json(r, tol));
  emit(out, a.out);
  if (!a.out.empty()) std::cout << Json{{"passed", r.passed(tol)}, {"max_residual", r.max_residual}}.dump() << "\n";
  return r.passed(tol) ? kOk : kFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Equivariant functions from scalar invariants: features, group sampling, certification, training"};
  app.footer(kSchemas);
  app.require_subcommand(1);
  std::function<int()> action;

  FeaturesArgs fa;
  auto* features = app.add_subcommand("features", "Compute gram, subdeterminant and Omega features of a tuple");
  features->add_option("--metric", fa.metric, "euclid or minkowski")->check(CLI::IsMember({"euclid", "minkowski"}));
  features->add_flag("--subdets", fa.subdets, "Include d x d subdeterminants");
  features->add_option("--omega", fa.omega, "Include the Omega band sample for rank d");
  features->add_option("--in", fa.in, "Tuple file (.json or .csv)")->required();
  features->add_option("--out", fa.out, "Output file (default stdout)");
  features->add_option("--format", fa.format, "json, or csv for the gram matrix only")->check(CLI::IsMember({"json", "csv"}));
  features->callback([&] { action = [&] { return run_features(fa); }; });

  SampleArgs sa;
  auto* sample = app.add_subcommand("sample-group", "Sample a group element and print it as JSON");
  sample->add_option("--group", sa.group, "o, so, lorentz, t, e, poincare or perm")
      ->required()
      ->check(CLI::IsMember({"o", "so", "lorentz", "t", "e", "poincare", "perm"}));
  sample->add_option("--dim", sa.dim, "Dimension (d+1 for Lorentz/Poincare, n for perm)");
  sample->add_option("--seed", sa.seed, "Random seed");
  sample->add_option("--rapidity-max", sa.rapidity_max, "Largest boost rapidity");
  sample->callback([&] { action = [&] { return run_sample(sa); }; });

  DemoArgs da;
  auto* demo = app.add_subcommand("demo", "Evaluate the physics examples on a particles file");
  demo->add_option("which", da.which, "energy or emforce")->required()->check(CLI::IsMember({"energy", "emforce"}));
  demo->add_option("--in", da.in, "Particles file")->required();
  demo->add_option("--check-equivariance", da.check, "Number of group elements to test around the input");
  demo->add_option("--seed", da.seed, "Random seed (needed with --check-equivariance)");
  demo->add_option("--tolerance", da.tolerance, "Residual tolerance");
  demo->add_option("--threads", da.threads, "Worker threads");
  demo->callback([&] { action = [&] { return run_demo(da); }; });

  EinsumArgs ea;
  auto* ein = app.add_subcommand("einsum", "Check or evaluate an index expression");
  ein->require_subcommand(1);
  auto* check = ein->add_subcommand("check", "Validate the repeated-index rules");
  check->add_option("expr", ea.expr, "Expression, e.g. \"u_i v_i\"")->required();
  check->add_option("--metric", ea.metric, "euclid or minkowski")->check(CLI::IsMember({"euclid", "minkowski"}));
  check->add_option("--mode", ea.mode, "plain or metric-aware")->check(CLI::IsMember({"plain", "metric-aware"}));
  check->add_option("--dim", ea.dim, "Dimension of the metric");
  check->callback([&] { action = [&] { return run_einsum_check(ea); }; });
  auto* eval = ein->add_subcommand("eval", "Evaluate with tensor bindings");
  eval->add_option("expr", ea.expr, "Expression")->required();
  eval->add_option("--bind", ea.bind, "Bindings file")->required();
  eval->add_option("--dim", ea.dim, "Dimension every index runs over");
  eval->add_option("--metric", ea.metric, "euclid or minkowski")->check(CLI::IsMember({"euclid", "minkowski"}));
  eval->callback([&] { action = [&] { return run_einsum_eval(ea); }; });

  TrainArgs ta;
  auto* tr = app.add_subcommand("train", "Train the message-passing force model");
  tr->add_option("--config", ta.config, "Key-value config file")->required();
  tr->add_option("--out", ta.out, "Model JSON output");
  tr->add_option("--report", ta.report, "Per-epoch CSV report");
  tr->add_option("--seed", ta.seed, "Overrides the config seed");
  tr->add_option("--threads", ta.threads, "Worker threads");
  tr->callback([&] { action = [&] { return run_train(ta); }; });

  CertifyArgs ca;
  auto* cert = app.add_subcommand("certify", "Randomized symmetry certification of a target");
  cert->add_option("--target", ca.target, "gram, energy, emforce, model:FILE or einsum:EXPR")->required();
  cert->add_option("--spec", ca.spec, "Symmetry spec JSON (defaults depend on the target)");
  cert->add_option("--trials", ca.trials, "Number of trials")->check(CLI::PositiveNumber);
  cert->add_option("--seed", ca.seed, "Random seed");
  cert->add_option("--tolerance", ca.tolerance, "Pass threshold for the max residual");
  cert->add_option("--slots", ca.slots, "Number of input slots (target default if omitted)");
  cert->add_option("--threads", ca.threads, "Worker threads");
  cert->add_option("--out", ca.out, "Report file (default stdout)");
  cert->callback([&] { action = [&] { return run_certify(ca); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }
  try {
    return action();
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  }
}
