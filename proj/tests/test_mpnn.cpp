#include <gtest/gtest.h>

#include "equiscalar/mpnn.hpp"
#include "test_support.hpp"

using namespace equiscalar;
using equiscalar::testing::random_vec;

namespace {

std::vector<Particle> random_particles(RngState& rng, std::size_t n) {
  return generate_dataset(rng, n, 1).front().particles;
}

MpnnModel small_model(std::size_t n, std::size_t layers, std::vector<std::size_t> widths, RngState& rng,
                      MessageInput input = MessageInput::FullConcat, Activation act = Activation::Tanh) {
  MpnnConfig cfg;
  cfg.n_particles = n;
  cfg.layers = layers;
  cfg.widths = std::move(widths);
  cfg.activation = act;
  cfg.edges.inverse_distance = true;
  cfg.edges.rbf_count = 2;
  cfg.input = input;
  return MpnnModel::random(cfg, rng);
}

// L = sum_i <w_i, out_i>, so dL/dout_i = w_i.
double linear_loss(const MpnnModel& m, const std::vector<Particle>& ps, const std::vector<Vec>& w) {
  const auto out = mpnn_forward(m, ps);
  double s = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) s += out[i].dot(w[i]);
  return s;
}

void expect_gradient_matches_central_difference(MpnnModel m, const std::vector<Particle>& ps, RngState& rng) {
  std::vector<Vec> w;
  for (std::size_t i = 0; i < ps.size(); ++i) w.push_back(random_vec(rng, 3));
  MpnnCache cache;
  (void)mpnn_forward(m, ps, &cache);
  const MpnnGradient g = mpnn_backward(m, cache, w);
  const double h = 1e-5;
  for (std::size_t k = 0; k < m.nets().size(); ++k)
    for (std::size_t p = 0; p < m.nets()[k].parameter_count(); ++p) {
      double& param = m.nets()[k].params()[p];
      const double saved = param;
      param = saved + h;
      const double up = linear_loss(m, ps, w);
      param = saved - h;
      const double down = linear_loss(m, ps, w);
      param = saved;
      const double fd = (up - down) / (2.0 * h);
      const double an = g.nets[k][p];
      const bool ok = std::abs(an - fd) <= 1e-5 * std::abs(fd) || std::abs(an - fd) <= 1e-8;
      EXPECT_TRUE(ok) << "net " << k << " param " << p << " analytic " << an << " numeric " << fd;
    }
}

}  // namespace

TEST(EdgeFeatures, TwoUnitChargesAtUnitDistance) {
  const std::vector<Particle> ps{Particle(1, 1, Vec{0, 0, 0}, Vec{0, 0, 0}), Particle(1, 1, Vec{1, 0, 0}, Vec{0, 0, 0})};
  const EdgeFeatures e = edge_features(ps);
  ASSERT_EQ(e.channels, 3u);
  EXPECT_EQ(std::vector<double>(e.at(0, 1).begin(), e.at(0, 1).end()), (std::vector<double>{1, 0, 1}));
}

TEST(EdgeFeatures, ZeroChargesZeroFirstChannel) {
  RngState rng(1);
  std::vector<Particle> ps;
  for (int i = 0; i < 4; ++i) ps.emplace_back(1, 0, random_vec(rng, 3), random_vec(rng, 3));
  const EdgeFeatures e = edge_features(ps, {true, 3});
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) EXPECT_EQ(e.at(i, j)[0], 0.0);
}

TEST(EdgeFeatures, SymmetricChannelsAndInverseDistance) {
  RngState rng(2);
  const auto ps = random_particles(rng, 5);
  const EdgeFeatures e = edge_features(ps, {true, 4});
  ASSERT_EQ(e.channels, 8u);
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 5; ++j) {
      for (std::size_t k = 0; k < 3; ++k) EXPECT_EQ(e.at(i, j)[k], e.at(j, i)[k]);
      EXPECT_GE(e.at(i, j)[2], 0.0);
      if (i != j) EXPECT_NEAR(e.at(i, j)[3], 1.0 / (ps[i].r - ps[j].r).norm(), 1e-12);
    }
  EXPECT_EQ(e.at(2, 2)[3], 0.0);
}

TEST(EdgeFeatures, InvariantUnderRotationAndTranslation) {
  RngState rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const auto ps = random_particles(rng, 4);
    const Mat q = *sample_orthogonal(rng, 3).linear_part();
    const Vec w = random_vec(rng, 3, 2.0);
    std::vector<Particle> moved;
    for (const Particle& p : ps) moved.emplace_back(p.mass, p.charge, q * p.r + w, q * p.v);
    const EdgeFeatures a = edge_features(ps, {true, 3}), b = edge_features(moved, {true, 3});
    for (std::size_t k = 0; k < a.data.size(); ++k) EXPECT_NEAR(a.data[k], b.data[k], 1e-10 * (1.0 + std::abs(a.data[k])));
  }
}

TEST(EdgeFeatures, Errors) {
  const Particle p(1, 1, Vec{0, 0, 0}, Vec{0, 0, 0});
  EXPECT_THROW(edge_features({p}), Error);
  EXPECT_THROW(edge_features({p, p}, {true, 0}), CoincidentPositionsError);
  EXPECT_NO_THROW(edge_features({p, p}));
}

TEST(MpnnForward, ZeroNetworksReturnInitialState) {
  RngState rng(4);
  const auto ps = random_particles(rng, 4);
  MpnnConfig cfg;
  const MpnnModel zero(cfg);
  const auto out = mpnn_forward(zero, ps);
  VecAccumulator c(3);
  for (const Particle& p : ps) c.add(0.25, p.r);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_LE((out[i] - (ps[i].r - c.value())).max_abs(), 1e-15);
  cfg.readout = Readout::VelocityChannel;
  const auto vout = mpnn_forward(MpnnModel(cfg), ps);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(vout[i], ps[i].v);
}

TEST(MpnnForward, MirroredPairGivesOppositeOutputs) {
  RngState rng(5);
  const MpnnModel m = small_model(2, 2, {8, 8}, rng);
  for (int trial = 0; trial < 20; ++trial) {
    const Vec r = random_vec(rng, 3), v = random_vec(rng, 3);
    const auto out = mpnn_forward(m, {Particle(1, 1, r, v), Particle(1, 1, -1.0 * r, -1.0 * v)});
    EXPECT_LE((out[0] + out[1]).max_abs(), 1e-12 * (1.0 + out[0].norm()));
  }
}

TEST(MpnnForward, RotatesWithInputs) {
  RngState rng(6);
  const MpnnModel m = small_model(4, 2, {16, 16}, rng);
  for (int trial = 0; trial < 50; ++trial) {
    const auto ps = random_particles(rng, 4);
    const Mat q = *sample_orthogonal(rng, 3).linear_part();
    std::vector<Particle> moved;
    for (const Particle& p : ps) moved.emplace_back(p.mass, p.charge, q * p.r, q * p.v);
    const auto a = mpnn_forward(m, ps), b = mpnn_forward(m, moved);
    for (std::size_t i = 0; i < 4; ++i) EXPECT_LE((b[i] - q * a[i]).norm(), 1e-9 * (1.0 + a[i].norm()));
  }
}

TEST(MpnnForward, JointSymmetryForBothInputModes) {
  RngState rng(7);
  const MpnnModel full = small_model(5, 2, {16, 16}, rng);
  const MpnnModel pooled = small_model(5, 2, {16, 16}, rng, MessageInput::Pooled, Activation::Softplus);
  for (int trial = 0; trial < 50; ++trial) {
    const auto ps = random_particles(rng, 5);
    EXPECT_LE(mpnn_symmetry_residual(full, ps, rng), 1e-9);
    EXPECT_LE(mpnn_symmetry_residual(pooled, ps, rng), 1e-9);
  }
  EXPECT_NO_THROW(mpnn_forward(pooled, random_particles(rng, 7)));
}

TEST(MpnnForward, FullConcatRejectsOtherParticleCounts) {
  RngState rng(8);
  const MpnnModel m = small_model(4, 1, {8}, rng);
  EXPECT_THROW(mpnn_forward(m, random_particles(rng, 3)), DimensionError);
}

TEST(MpnnBackward, MatchesCentralDifferencesOnSmallModel) {
  RngState rng(9);
  const MpnnModel m = small_model(2, 1, {8}, rng);
  expect_gradient_matches_central_difference(m, random_particles(rng, 2), rng);
}

TEST(MpnnBackward, MatchesCentralDifferencesOnDeeperModel) {
  RngState rng(10);
  const MpnnModel m = small_model(3, 2, {6, 5}, rng, MessageInput::FullConcat, Activation::Softplus);
  expect_gradient_matches_central_difference(m, random_particles(rng, 3), rng);
}

TEST(MpnnBackward, ZeroLossGradientGivesZeroGradient) {
  RngState rng(11);
  const MpnnModel m = small_model(3, 2, {8}, rng);
  MpnnCache cache;
  (void)mpnn_forward(m, random_particles(rng, 3), &cache);
  EXPECT_EQ(mpnn_backward(m, cache, std::vector<Vec>(3, Vec::zeros(3))).max_abs(), 0.0);
}

TEST(MpnnBackward, DuplicateSampleDoublesGradient) {
  RngState rng(12);
  const MpnnModel m = small_model(3, 2, {8}, rng);
  const auto data = generate_dataset(rng, 3, 1);
  const LossAndGradient once = loss_and_gradient(m, {&data[0]});
  const LossAndGradient twice = loss_and_gradient(m, {&data[0], &data[0]});
  EXPECT_DOUBLE_EQ(twice.loss_sum, 2.0 * once.loss_sum);
  for (std::size_t k = 0; k < once.grad.nets.size(); ++k)
    for (std::size_t p = 0; p < once.grad.nets[k].size(); ++p)
      EXPECT_DOUBLE_EQ(twice.grad.nets[k][p], 2.0 * once.grad.nets[k][p]);
}

TEST(MpnnBackward, MissingCacheIsAnError) {
  RngState rng(13);
  const MpnnModel m = small_model(2, 1, {4}, rng);
  EXPECT_THROW(mpnn_backward(m, MpnnCache{}, std::vector<Vec>(2, Vec::zeros(3))), Error);
}

TEST(GenerateDataset, TargetsAndSpacing) {
  RngState rng(14);
  const auto data = generate_dataset(rng, 5, 50);
  for (const MpnnSample& s : data) {
    for (std::size_t i = 0; i < 5; ++i) {
      std::vector<Particle> others;
      for (std::size_t j = 0; j < 5; ++j) {
        if (j != i) others.push_back(s.particles[j]);
        if (j > i) EXPECT_GE((s.particles[i].r - s.particles[j].r).norm(), 0.1);
      }
      EXPECT_EQ(s.forces[i], em_force_scalar(s.particles[i], others));
      EXPECT_TRUE(s.particles[i].charge == 1.0 || s.particles[i].charge == -1.0);
      EXPECT_LE(s.particles[i].r.max_abs(), 1.0);
    }
  }
}

TEST(GenerateDataset, SameSeedSameData) {
  RngState a(15), b(15);
  const auto x = generate_dataset(a, 4, 20), y = generate_dataset(b, 4, 20);
  for (std::size_t s = 0; s < x.size(); ++s) {
    EXPECT_EQ(x[s].forces, y[s].forces);
    for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(x[s].particles[i].v, y[s].particles[i].v);
  }
}

TEST(GenerateDataset, ImpossibleSpacingIsReported) {
  RngState rng(16);
  EXPECT_THROW(generate_dataset(rng, 2, 1, {}, {5.0, 100}), Error);
  EXPECT_THROW(generate_dataset(rng, 1, 1), Error);
}

TEST(Train, ZeroLearningRateKeepsLossConstant) {
  RngState rng(17);
  const auto data = generate_dataset(rng, 3, 40);
  MpnnModel m = small_model(3, 1, {8}, rng);
  TrainConfig cfg;
  cfg.epochs = 5;
  cfg.lr = 0.0;
  cfg.batch = 8;
  const TrainReport r = train(m, data, cfg);
  ASSERT_EQ(r.rows.size(), 6u);
  for (const EpochRow& row : r.rows) {
    EXPECT_NEAR(row.val_mse, r.rows[0].val_mse, 1e-12 * r.rows[0].val_mse);
    EXPECT_NEAR(row.train_mse, r.rows[0].train_mse, 1e-12 * r.rows[0].train_mse);
  }
}

TEST(Train, MemorisesRepeatedSample) {
  RngState rng(18);
  const auto one = generate_dataset(rng, 3, 1);
  const std::vector<MpnnSample> data(20, one[0]);
  MpnnModel m = small_model(3, 1, {8}, rng);
  TrainConfig cfg;
  cfg.epochs = 50;
  cfg.lr = 1e-3;
  cfg.batch = 4;
  cfg.val_fraction = 0.0;
  const TrainReport r = train(m, data, cfg);
  ASSERT_FALSE(r.diverged) << r.message;
  for (std::size_t e = 2; e < r.rows.size(); ++e) EXPECT_LT(r.rows[e].train_mse, r.rows[e - 1].train_mse) << e;
  EXPECT_LT(r.rows.back().train_mse, r.rows[1].train_mse);
}

TEST(Train, DeterministicAcrossRunsAndThreadCounts) {
  RngState rng(19);
  const auto data = generate_dataset(rng, 4, 60);
  RngState i1(5), i2(5);
  MpnnModel a = small_model(4, 2, {8, 8}, i1), b = small_model(4, 2, {8, 8}, i2);
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.batch = 16;
  cfg.seed = 9;
  const TrainReport ra = train(a, data, cfg);
  cfg.threads = 3;
  const TrainReport rb = train(b, data, cfg);
  ASSERT_EQ(ra.rows.size(), rb.rows.size());
  for (std::size_t e = 0; e < ra.rows.size(); ++e) {
    EXPECT_EQ(ra.rows[e].train_mse, rb.rows[e].train_mse);
    EXPECT_EQ(ra.rows[e].val_mse, rb.rows[e].val_mse);
    EXPECT_EQ(ra.rows[e].equivariance_residual, rb.rows[e].equivariance_residual);
  }
  for (std::size_t k = 0; k < a.nets().size(); ++k) EXPECT_EQ(a.nets()[k].params(), b.nets()[k].params());
}

TEST(Train, DivergenceIsReported) {
  RngState rng(20);
  const auto data = generate_dataset(rng, 3, 20);
  MpnnModel m = small_model(3, 1, {8}, rng);
  TrainConfig cfg;
  cfg.epochs = 50;
  cfg.lr = 1e6;
  cfg.batch = 4;
  const TrainReport r = train(m, data, cfg);
  EXPECT_TRUE(r.diverged);
  EXPECT_FALSE(r.message.empty());
}
