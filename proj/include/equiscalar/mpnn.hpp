#pragma once

// Message-passing network for charged particles. Every node carries a
// position-channel and a velocity-channel hidden vector; each round adds
//
//   m_r,i = sum_{j != i} (h_r,i - h_r,j) g_r(x_ij) + (h_v,i - h_v,j) g_v(x_ij)
//   m_v,i = sum_{j != i} (h_r,i - h_r,j) gt_r(x_ij) + (h_v,i - h_v,j) gt_v(x_ij)
//
// where x_ij is built only from invariant edge scalars, so the output rotates
// with the inputs, ignores translations and follows input permutations.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "equiscalar/core_types.hpp"
#include "equiscalar/group_actions.hpp"
#include "equiscalar/parallel.hpp"
#include "equiscalar/physics.hpp"
#include "equiscalar/random.hpp"
#include "equiscalar/scalar_net.hpp"

namespace equiscalar {

// ---------------------------------------------------------------------------
// Edge features
// ---------------------------------------------------------------------------

struct EdgeOptions {
  bool inverse_distance = false;  // 1/|r_i - r_j|, zero on self edges
  std::size_t rbf_count = 0;      // Gaussian bumps of |r_i - r_j| with centers spread over [0, rbf_max]
  double rbf_max = 2.0;
  double rbf_width = 0.25;

  [[nodiscard]] std::size_t channels() const noexcept { return 3 + (inverse_distance ? 1 : 0) + rbf_count; }
  friend bool operator==(const EdgeOptions&, const EdgeOptions&) = default;
};

/// e_ij for every ordered pair including i == j, channels contiguous.
struct EdgeFeatures {
  std::size_t n = 0;
  std::size_t channels = 0;
  std::vector<double> data;

  [[nodiscard]] std::span<const double> at(std::size_t i, std::size_t j) const {
    return {data.data() + (i * n + j) * channels, channels};
  }
};

inline EdgeFeatures edge_features(const std::vector<Particle>& ps, const EdgeOptions& opts = {}) {
  const std::size_t n = ps.size();
  if (n < 2) throw Error(ErrorCode::InvalidArgument, "edge features need at least two particles");
  for (const Particle& p : ps)
    if (p.r.dim() != 3) throw DimensionError(3, p.r.dim(), "particle for edge features");
  EdgeFeatures e{n, opts.channels(), std::vector<double>(n * n * opts.channels())};
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double* out = e.data.data() + (i * n + j) * e.channels;
      const Vec delta = ps[i].r - ps[j].r;
      const double dd = delta.dot(delta);
      out[0] = ps[i].charge * ps[j].charge;
      out[1] = ps[i].v.dot(ps[j].v);
      out[2] = dd;
      std::size_t c = 3;
      if (opts.inverse_distance) {
        if (i != j && dd == 0.0) throw CoincidentPositionsError(std::min(i, j), std::max(i, j));
        out[c++] = i == j ? 0.0 : 1.0 / std::sqrt(dd);
      }
      const double dist = std::sqrt(dd);
      for (std::size_t b = 0; b < opts.rbf_count; ++b) {
        const double center =
            opts.rbf_count == 1 ? 0.0 : opts.rbf_max * static_cast<double>(b) / static_cast<double>(opts.rbf_count - 1);
        const double z = (dist - center) / opts.rbf_width;
        out[c++] = std::exp(-0.5 * z * z);
      }
    }
  return e;
}

// ---------------------------------------------------------------------------
// Model
// ---------------------------------------------------------------------------

/// FullConcat feeds g the whole set {e_ik} for node i (width grows with n);
/// Pooled feeds (e_ij, sum_k e_ik).
enum class MessageInput { FullConcat, Pooled };
enum class Readout { PositionChannel, VelocityChannel };

struct MpnnConfig {
  std::size_t n_particles = 4;
  std::size_t layers = 2;
  std::vector<std::size_t> widths{16, 16};
  Activation activation = Activation::Tanh;
  EdgeOptions edges;
  MessageInput input = MessageInput::FullConcat;
  Readout readout = Readout::PositionChannel;
};

/// The four coefficient networks of one round, in the order g_r, g_v, gt_r, gt_v.
inline constexpr std::size_t kNetsPerLayer = 4;

class MpnnModel {
 public:
  explicit MpnnModel(MpnnConfig config) : config_(std::move(config)) {
    if (config_.layers == 0) throw Error(ErrorCode::InvalidArgument, "message passing needs at least one round");
    if (config_.input == MessageInput::FullConcat && config_.n_particles < 2) {
      throw Error(ErrorCode::InvalidArgument, "full-concat input needs n_particles >= 2");
    }
    for (std::size_t t = 0; t < config_.layers * kNetsPerLayer; ++t)
      nets_.emplace_back(input_width(), config_.widths, config_.activation);
  }

  static MpnnModel random(MpnnConfig config, RngState& rng) {
    MpnnModel m(std::move(config));
    for (ScalarNet& net : m.nets_) net.initialize(rng);
    return m;
  }

  [[nodiscard]] const MpnnConfig& config() const noexcept { return config_; }
  [[nodiscard]] std::size_t input_width() const noexcept {
    const std::size_t c = config_.edges.channels();
    return config_.input == MessageInput::FullConcat ? c * config_.n_particles : 2 * c;
  }
  [[nodiscard]] const ScalarNet& net(std::size_t layer, std::size_t which) const { return nets_.at(layer * kNetsPerLayer + which); }
  [[nodiscard]] const std::vector<ScalarNet>& nets() const noexcept { return nets_; }
  std::vector<ScalarNet>& nets() noexcept { return nets_; }

  [[nodiscard]] std::size_t parameter_count() const {
    std::size_t total = 0;
    for (const ScalarNet& n : nets_) total += n.parameter_count();
    return total;
  }

 private:
  MpnnConfig config_;
  std::vector<ScalarNet> nets_;
};

/// One flat gradient per network, matching MpnnModel::nets().
struct MpnnGradient {
  std::vector<std::vector<double>> nets;

  static MpnnGradient zeros_like(const MpnnModel& m) {
    MpnnGradient g;
    for (const ScalarNet& n : m.nets()) g.nets.emplace_back(n.parameter_count(), 0.0);
    return g;
  }
  void add(const MpnnGradient& o, double scale = 1.0) {
    for (std::size_t k = 0; k < nets.size(); ++k)
      for (std::size_t p = 0; p < nets[k].size(); ++p) nets[k][p] += scale * o.nets[k][p];
  }
  [[nodiscard]] double max_abs() const {
    double m = 0.0;
    for (const auto& v : nets)
      for (double x : v) m = std::max(m, std::abs(x));
    return m;
  }
};

namespace detail {

/// Network input for the ordered pair (i, j).
inline std::vector<double> pair_input(const EdgeFeatures& e, std::size_t i, std::size_t j, MessageInput mode) {
  const std::size_t c = e.channels;
  std::vector<double> x;
  const auto eij = e.at(i, j);
  x.insert(x.end(), eij.begin(), eij.end());
  if (mode == MessageInput::Pooled) {
    std::vector<double> pooled(c, 0.0);
    for (std::size_t k = 0; k < e.n; ++k)
      for (std::size_t ch = 0; ch < c; ++ch) pooled[ch] += e.at(i, k)[ch];
    x.insert(x.end(), pooled.begin(), pooled.end());
    return x;
  }
  const auto eii = e.at(i, i);
  x.insert(x.end(), eii.begin(), eii.end());
  // The remaining edges form a set; a canonical order (squared distance first)
  // keeps the network blind to how the other particles were numbered.
  std::vector<std::size_t> rest;
  for (std::size_t k = 0; k < e.n; ++k)
    if (k != i && k != j) rest.push_back(k);
  auto key = [&](std::size_t k) {
    const auto ek = e.at(i, k);
    std::vector<double> v{ek[2]};
    for (std::size_t ch = 0; ch < c; ++ch)
      if (ch != 2) v.push_back(ek[ch]);
    return v;
  };
  std::stable_sort(rest.begin(), rest.end(), [&](std::size_t a, std::size_t b) { return key(a) < key(b); });
  for (std::size_t k : rest) {
    const auto eik = e.at(i, k);
    x.insert(x.end(), eik.begin(), eik.end());
  }
  return x;
}

}  // namespace detail

/// Intermediates kept by the forward pass for the backward pass.
struct MpnnCache {
  std::size_t n = 0;
  std::vector<std::vector<double>> inputs;               // by pair p = i * n + j (i != j)
  std::vector<std::vector<double>> g;                    // [layer * 4 + net][p]
  std::vector<std::vector<ScalarNet::Cache>> net_cache;  // [layer * 4 + net][p]
  std::vector<std::vector<double>> hr, hv;               // [round][i * 3 + axis], rounds 0..T
};

inline std::vector<Vec> mpnn_forward(const MpnnModel& model, const std::vector<Particle>& ps, MpnnCache* cache = nullptr) {
  const MpnnConfig& cfg = model.config();
  const std::size_t n = ps.size();
  if (cfg.input == MessageInput::FullConcat && n != cfg.n_particles) {
    throw DimensionError(cfg.n_particles, n, "particle count of a full-concat model (network input width " +
                                                 std::to_string(model.input_width()) + ")");
  }
  const EdgeFeatures e = edge_features(ps, cfg.edges);

  MpnnCache local;
  MpnnCache& c = cache ? *cache : local;
  c = MpnnCache{};
  c.n = n;
  c.inputs.resize(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j) c.inputs[i * n + j] = detail::pair_input(e, i, j, cfg.input);

  std::vector<double> hr(3 * n), hv(3 * n);
  std::array<double, 3> centroid{0, 0, 0};
  for (const Particle& p : ps)
    for (std::size_t a = 0; a < 3; ++a) centroid[a] += p.r[a] / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t a = 0; a < 3; ++a) {
      hr[3 * i + a] = ps[i].r[a] - centroid[a];
      hv[3 * i + a] = ps[i].v[a];
    }
  c.hr.push_back(hr);
  c.hv.push_back(hv);

  c.g.assign(cfg.layers * kNetsPerLayer, std::vector<double>(n * n, 0.0));
  if (cache) c.net_cache.assign(cfg.layers * kNetsPerLayer, std::vector<ScalarNet::Cache>(n * n));
  for (std::size_t t = 0; t < cfg.layers; ++t) {
    for (std::size_t k = 0; k < kNetsPerLayer; ++k) {
      const ScalarNet& net = model.net(t, k);
      for (std::size_t p = 0; p < n * n; ++p) {
        if (p / n == p % n) continue;
        c.g[t * kNetsPerLayer + k][p] = net.forward(c.inputs[p], cache ? &c.net_cache[t * kNetsPerLayer + k][p] : nullptr);
      }
    }
    const auto& a = c.g[t * kNetsPerLayer + 0];
    const auto& b = c.g[t * kNetsPerLayer + 1];
    const auto& ct = c.g[t * kNetsPerLayer + 2];
    const auto& et = c.g[t * kNetsPerLayer + 3];
    std::vector<double> nr = hr, nv = hv;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        if (i == j) continue;
        const std::size_t p = i * n + j;
        for (std::size_t ax = 0; ax < 3; ++ax) {
          const double dr = hr[3 * i + ax] - hr[3 * j + ax];
          const double dv = hv[3 * i + ax] - hv[3 * j + ax];
          nr[3 * i + ax] += a[p] * dr + b[p] * dv;
          nv[3 * i + ax] += ct[p] * dr + et[p] * dv;
        }
      }
    hr = std::move(nr);
    hv = std::move(nv);
    c.hr.push_back(hr);
    c.hv.push_back(hv);
  }

  const std::vector<double>& out = cfg.readout == Readout::PositionChannel ? hr : hv;
  std::vector<Vec> result;
  result.reserve(n);
  for (std::size_t i = 0; i < n; ++i) result.push_back(Vec{out[3 * i], out[3 * i + 1], out[3 * i + 2]});
  return result;
}

/// Gradient of a loss with respect to every network parameter, given
/// d(loss)/d(output_i) for the forward pass recorded in cache.
inline MpnnGradient mpnn_backward(const MpnnModel& model, const MpnnCache& cache, const std::vector<Vec>& loss_grad) {
  const MpnnConfig& cfg = model.config();
  const std::size_t n = cache.n;
  if (loss_grad.size() != n) throw DimensionError(n, loss_grad.size(), "loss gradient length");
  if (cache.net_cache.size() != cfg.layers * kNetsPerLayer) {
    throw Error(ErrorCode::InvalidArgument, "mpnn_backward needs a cache filled by mpnn_forward");
  }
  MpnnGradient grad = MpnnGradient::zeros_like(model);

  std::vector<double> gr(3 * n, 0.0), gv(3 * n, 0.0);
  std::vector<double>& readout = cfg.readout == Readout::PositionChannel ? gr : gv;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t a = 0; a < 3; ++a) readout[3 * i + a] = loss_grad[i][a];

  for (std::size_t t = cfg.layers; t-- > 0;) {
    const std::vector<double>& hr = cache.hr[t];
    const std::vector<double>& hv = cache.hv[t];
    const auto& a = cache.g[t * kNetsPerLayer + 0];
    const auto& b = cache.g[t * kNetsPerLayer + 1];
    const auto& ct = cache.g[t * kNetsPerLayer + 2];
    const auto& et = cache.g[t * kNetsPerLayer + 3];
    std::vector<double> pr = gr, pv = gv;  // residual path
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        if (i == j) continue;
        const std::size_t p = i * n + j;
        double da = 0.0, db = 0.0, dc = 0.0, de = 0.0;
        for (std::size_t ax = 0; ax < 3; ++ax) {
          const double dr = hr[3 * i + ax] - hr[3 * j + ax];
          const double dv = hv[3 * i + ax] - hv[3 * j + ax];
          const double Gr = gr[3 * i + ax], Gv = gv[3 * i + ax];
          da += Gr * dr;
          db += Gr * dv;
          dc += Gv * dr;
          de += Gv * dv;
          const double to_r = a[p] * Gr + ct[p] * Gv;
          const double to_v = b[p] * Gr + et[p] * Gv;
          pr[3 * i + ax] += to_r;
          pr[3 * j + ax] -= to_r;
          pv[3 * i + ax] += to_v;
          pv[3 * j + ax] -= to_v;
        }
        const std::array<double, kNetsPerLayer> dg{da, db, dc, de};
        for (std::size_t k = 0; k < kNetsPerLayer; ++k)
          model.net(t, k).backward(cache.net_cache[t * kNetsPerLayer + k][p], dg[k], grad.nets[t * kNetsPerLayer + k]);
      }
    gr = std::move(pr);
    gv = std::move(pv);
  }
  return grad;
}

// ---------------------------------------------------------------------------
// Data and training
// ---------------------------------------------------------------------------

struct MpnnSample {
  std::vector<Particle> particles;
  std::vector<Vec> forces;
};

inline constexpr double kMinPairDistance = 0.1;
inline constexpr std::size_t kMaxPlacementAttempts = 10000;

/// Force on each particle from all the others, via the scalar-product form.
inline std::vector<Vec> particle_forces(const std::vector<Particle>& ps, const PhysConstants& k) {
  std::vector<Vec> out;
  for (std::size_t i = 0; i < ps.size(); ++i) {
    std::vector<Particle> others;
    for (std::size_t j = 0; j < ps.size(); ++j)
      if (j != i) others.push_back(ps[j]);
    out.push_back(em_force_scalar(ps[i], others, k));
  }
  return out;
}

struct DatasetOptions {
  double min_distance = kMinPairDistance;
  std::size_t max_attempts = kMaxPlacementAttempts;  // per particle
};

/// Positions uniform in [-1,1]^3 with pairwise distance >= 0.1, velocities
/// N(0, 0.3^2) per component, charges +-1 with equal odds.
inline std::vector<MpnnSample> generate_dataset(RngState& rng, std::size_t n_particles, std::size_t n_samples,
                                                const PhysConstants& k = {}, const DatasetOptions& opts = {}) {
  if (n_particles < 2) throw Error(ErrorCode::InvalidArgument, "datasets need at least two particles");
  std::vector<MpnnSample> out;
  out.reserve(n_samples);
  for (std::size_t s = 0; s < n_samples; ++s) {
    std::vector<Vec> pos;
    while (pos.size() < n_particles) {
      bool placed = false;
      for (std::size_t attempt = 0; attempt < opts.max_attempts && !placed; ++attempt) {
        const Vec r{rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
        placed = std::all_of(pos.begin(), pos.end(), [&](const Vec& p) { return (p - r).norm() >= opts.min_distance; });
        if (placed) pos.push_back(r);
      }
      if (!placed) {
        throw Error(ErrorCode::NotConverged, "could not place particle " + std::to_string(pos.size() + 1) + " of " +
                                                 std::to_string(n_particles) + " at distance >= " +
                                                 std::to_string(opts.min_distance) + " after " +
                                                 std::to_string(opts.max_attempts) + " attempts");
      }
    }
    MpnnSample sample;
    for (std::size_t i = 0; i < n_particles; ++i) {
      const Vec v{rng.normal(0.0, 0.3), rng.normal(0.0, 0.3), rng.normal(0.0, 0.3)};
      const double q = rng.coin() ? 1.0 : -1.0;
      sample.particles.emplace_back(1.0, q, pos[i], v);
    }
    sample.forces = particle_forces(sample.particles, k);
    out.push_back(std::move(sample));
  }
  return out;
}

/// Mean squared error over all force components of one sample.
inline double sample_mse(const std::vector<Vec>& out, const std::vector<Vec>& target) {
  double s = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const Vec d = out[i] - target[i];
    s += d.dot(d);
  }
  return s / static_cast<double>(3 * out.size());
}

struct LossAndGradient {
  double loss_sum = 0.0;  // sum over samples of sample_mse
  MpnnGradient grad;      // gradient of loss_sum
};

/// Summed loss and gradient over the given samples; per-sample work runs in
/// parallel and is reduced in index order.
inline LossAndGradient loss_and_gradient(const MpnnModel& model, const std::vector<const MpnnSample*>& samples,
                                         std::size_t threads = 1) {
  std::vector<double> losses(samples.size());
  std::vector<MpnnGradient> grads(samples.size());
  parallel_for(samples.size(), threads, [&](std::size_t s) {
    const MpnnSample& sample = *samples[s];
    MpnnCache cache;
    const std::vector<Vec> out = mpnn_forward(model, sample.particles, &cache);
    losses[s] = sample_mse(out, sample.forces);
    const double scale = 2.0 / static_cast<double>(3 * out.size());
    std::vector<Vec> dl;
    for (std::size_t i = 0; i < out.size(); ++i) dl.push_back(scale * (out[i] - sample.forces[i]));
    grads[s] = mpnn_backward(model, cache, dl);
  });
  LossAndGradient r{0.0, MpnnGradient::zeros_like(model)};
  for (std::size_t s = 0; s < samples.size(); ++s) {
    r.loss_sum += losses[s];
    r.grad.add(grads[s]);
  }
  return r;
}

inline double dataset_mse(const MpnnModel& model, const std::vector<MpnnSample>& data, std::size_t threads = 1) {
  if (data.empty()) return 0.0;
  std::vector<double> losses(data.size());
  parallel_for(data.size(), threads, [&](std::size_t s) {
    losses[s] = sample_mse(mpnn_forward(model, data[s].particles), data[s].forces);
  });
  double sum = 0.0;
  for (double l : losses) sum += l;
  return sum / static_cast<double>(data.size());
}

/// Largest relative mismatch between the outputs on a jointly rotated,
/// translated and relabelled input and the correspondingly transformed outputs.
inline double mpnn_symmetry_residual(const MpnnModel& model, const std::vector<Particle>& ps, RngState& rng) {
  const std::vector<Vec> base = mpnn_forward(model, ps);
  const GroupElement q = sample_orthogonal(rng, 3);
  const GroupElement w = sample_translation(rng, 3);
  const GroupElement sigma = sample_permutation(rng, ps.size());
  const Mat qm = *q.linear_part();
  const std::vector<std::size_t> s = *sigma.permutation_part();
  std::vector<Particle> moved;
  for (std::size_t i = 0; i < ps.size(); ++i) {
    const Particle& p = ps[s[i]];
    moved.emplace_back(p.mass, p.charge, qm * p.r + *w.translation_part(), qm * p.v);
  }
  const std::vector<Vec> out = mpnn_forward(model, moved);
  double worst = 0.0;
  for (std::size_t i = 0; i < ps.size(); ++i) {
    const Vec expect = qm * base[s[i]];
    worst = std::max(worst, (out[i] - expect).norm() / (1.0 + expect.norm()));
  }
  return worst;
}

struct TrainConfig {
  std::size_t epochs = 200;
  double lr = 1e-3;
  std::size_t batch = 32;
  std::uint64_t seed = 0;
  double val_fraction = 0.2;
  std::size_t threads = 1;
  double divergence_limit = 1e6;
  std::size_t symmetry_samples = 4;  // validation samples checked for the per-epoch symmetry residual
};

struct EpochRow {
  std::size_t epoch = 0;
  double train_mse = 0.0;
  double val_mse = 0.0;
  double equivariance_residual = 0.0;
};

struct TrainReport {
  std::vector<EpochRow> rows;  // row 0 is the untrained model
  bool diverged = false;
  std::string message;
  std::size_t train_size = 0;
  std::size_t val_size = 0;
};

/// Plain minibatch SGD on the mean squared force error. The last
/// val_fraction of the dataset is held out for validation.
inline TrainReport train(MpnnModel& model, const std::vector<MpnnSample>& data, const TrainConfig& cfg) {
  if (cfg.batch == 0) throw Error(ErrorCode::InvalidArgument, "batch size must be positive");
  if (!(cfg.val_fraction >= 0.0 && cfg.val_fraction < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "val_fraction must be in [0, 1)");
  }
  const auto n_val = static_cast<std::size_t>(std::floor(cfg.val_fraction * static_cast<double>(data.size())));
  const std::size_t n_train = data.size() - n_val;
  if (n_train == 0) throw Error(ErrorCode::InvalidArgument, "training split is empty");
  const std::vector<MpnnSample> train_set(data.begin(), data.begin() + static_cast<long>(n_train));
  const std::vector<MpnnSample> val_set(data.begin() + static_cast<long>(n_train), data.end());

  TrainReport report;
  report.train_size = n_train;
  report.val_size = n_val;
  RngState root(cfg.seed);
  RngState shuffle_rng = root.split(1);
  RngState check_rng = root.split(2);

  auto symmetry = [&]() {
    double worst = 0.0;
    const auto& pool = val_set.empty() ? train_set : val_set;
    for (std::size_t s = 0; s < std::min(cfg.symmetry_samples, pool.size()); ++s)
      worst = std::max(worst, mpnn_symmetry_residual(model, pool[s].particles, check_rng));
    return worst;
  };

  report.rows.push_back({0, dataset_mse(model, train_set, cfg.threads), dataset_mse(model, val_set, cfg.threads), symmetry()});

  std::vector<std::size_t> order(n_train);
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    for (std::size_t i = n_train; i > 1; --i) std::swap(order[i - 1], order[shuffle_rng.index(i)]);
    EpochRow row{epoch, 0.0, 0.0, 0.0};
    try {
      double loss_sum = 0.0;
      for (std::size_t start = 0; start < n_train; start += cfg.batch) {
        const std::size_t end = std::min(n_train, start + cfg.batch);
        std::vector<const MpnnSample*> batch;
        for (std::size_t k = start; k < end; ++k) batch.push_back(&train_set[order[k]]);
        const LossAndGradient lg = loss_and_gradient(model, batch, cfg.threads);
        loss_sum += lg.loss_sum;
        const double step = cfg.lr / static_cast<double>(batch.size());
        for (std::size_t k = 0; k < model.nets().size(); ++k) {
          std::vector<double>& p = model.nets()[k].params();
          for (std::size_t j = 0; j < p.size(); ++j) p[j] -= step * lg.grad.nets[k][j];
        }
      }
      row.train_mse = loss_sum / static_cast<double>(n_train);
      row.val_mse = dataset_mse(model, val_set, cfg.threads);
      row.equivariance_residual = symmetry();
    } catch (const Error& e) {
      // Runaway weights surface as non-finite activations.
      if (e.code() != ErrorCode::NonFinite) throw;
      report.diverged = true;
      report.message = "non-finite values at epoch " + std::to_string(epoch);
      break;
    }
    report.rows.push_back(row);
    if (!std::isfinite(row.train_mse) || !std::isfinite(row.val_mse) || row.train_mse > cfg.divergence_limit ||
        row.val_mse > cfg.divergence_limit) {
      report.diverged = true;
      report.message = "loss exceeded " + std::to_string(cfg.divergence_limit) + " at epoch " + std::to_string(epoch);
      break;
    }
  }
  return report;
}

}  // namespace equiscalar
