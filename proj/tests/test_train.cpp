#include <gtest/gtest.h>

#include <cmath>

#include "rdist/pano.hpp"
#include "rdist/train.hpp"

using namespace rdist;

namespace {

NetworkConfig small_config() {
  NetworkConfig cfg;
  cfg.input_size = 16;
  cfg.stage_channels = {8, 16};
  cfg.blocks_per_stage = 1;
  cfg.head_width = 16;
  return cfg;
}

Dataset crops(std::size_t n, int size, std::uint64_t seed) {
  static const Image pano = procedural_panorama(1024, 512);
  SamplingSpec s;
  s.seed = seed;
  Dataset d;
  for (std::size_t i = 0; i < n; ++i) {
    const CropParams p = sample_crop_params(s, i);
    d.images.push_back(render_crop(pano, p, 64, 36, size, size, 1));
    d.labels.push_back({p.k1, p.k2});
  }
  return d;
}

}  // namespace

TEST(TrainConfig, Validation) {
  TrainConfig tc;
  EXPECT_EQ(tc.learning_rate, 1e-3);
  EXPECT_EQ(tc.batch_size, 32);
  EXPECT_EQ(tc.optimizer, OptimizerKind::Adam);
  EXPECT_EQ(tc.grid.size(), 64u);
  tc.batch_size = 0;
  EXPECT_THROW(tc.validate(), DomainError);
  tc = TrainConfig{};
  tc.learning_rate = -1;
  EXPECT_THROW(tc.validate(), DomainError);
}

TEST(Train, ZeroLearningRateOnlyMovesRunningStats) {
  const auto cfg = small_config();
  const Weights w = init_weights(cfg, 1);
  TrainConfig tc;
  tc.learning_rate = 0.0;
  tc.epochs = 1;
  tc.batch_size = 8;
  const auto r = train(w, cfg, crops(20, 16, 1), nullptr, tc);
  bool stats_moved = false;
  for (size_t i = 0; i < w.tensors.size(); ++i) {
    if (is_trainable(w.tensors[i].name)) {
      EXPECT_EQ(r.weights.tensors[i], w.tensors[i]) << w.tensors[i].name;
    } else {
      stats_moved |= r.weights.tensors[i] != w.tensors[i];
    }
  }
  EXPECT_TRUE(stats_moved);
}

TEST(Train, DeterministicUnderSeed) {
  const auto cfg = small_config();
  const Dataset d = crops(24, 16, 2);
  TrainConfig tc;
  tc.epochs = 2;
  tc.batch_size = 8;
  tc.seed = 4;
  const Weights w = init_weights(cfg, 4);
  const auto a = train(w, cfg, d, &d, tc);
  const auto b = train(w, cfg, d, &d, tc);
  EXPECT_EQ(a.weights, b.weights);
  ASSERT_EQ(a.log.size(), 2u);
  EXPECT_EQ(a.log[1].val_loss, b.log[1].val_loss);
  tc.seed = 5;
  EXPECT_NE(train(w, cfg, d, &d, tc).weights, a.weights);
}

TEST(Train, OverfitsSmallSet) {
  const NetworkConfig cfg;
  const Dataset d = crops(32, 64, 3);
  TrainConfig tc;
  tc.epochs = 300;
  const auto r = train(init_weights(cfg, 3), cfg, d, nullptr, tc);
  EXPECT_LT(r.log.back().train_loss, 1e-4);
}

TEST(Train, LossDecreasesEarlyAcrossSeeds) {
  const auto cfg = small_config();
  const Dataset d = crops(32, 16, 6);
  int monotone = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    TrainConfig tc;
    tc.epochs = 5;
    tc.seed = seed;
    const auto r = train(init_weights(cfg, seed), cfg, d, nullptr, tc);
    bool ok = true;
    for (size_t i = 1; i < r.log.size(); ++i) ok &= r.log[i].train_loss <= r.log[i - 1].train_loss;
    monotone += ok;
  }
  EXPECT_GE(monotone, 9);
}

TEST(Train, SingleSampleReachesTinyLoss) {
  const auto cfg = small_config();
  const Dataset d = crops(1, 16, 7);
  TrainConfig tc;
  tc.epochs = 500;
  tc.batch_size = 1;
  const auto r = train(init_weights(cfg, 7), cfg, d, nullptr, tc);
  EXPECT_LT(r.log.back().train_loss, 1e-6);
}

TEST(Train, DivergenceKeepsLastGoodWeights) {
  const auto cfg = small_config();
  Dataset d = crops(4, 16, 8);
  d.labels[2].k1 = std::nan("");
  TrainConfig tc;
  tc.epochs = 1;
  tc.batch_size = 4;
  const Weights w = init_weights(cfg, 8);
  try {
    train(w, cfg, d, nullptr, tc);
    FAIL() << "expected TrainingError";
  } catch (const TrainingError& e) {
    EXPECT_EQ(e.epoch(), 0);
    for (size_t i = 0; i < w.tensors.size(); ++i) {
      if (is_trainable(w.tensors[i].name)) EXPECT_EQ(e.last_good().tensors[i], w.tensors[i]);
    }
  }
}

TEST(Predict, DeterministicAndConsistent) {
  const auto cfg = small_config();
  const Weights w = init_weights(cfg, 9);
  const Dataset d = crops(5, 16, 9);
  const Predictions a = predict_all(w, cfg, d, 2), b = predict_all(w, cfg, d, 5);
  EXPECT_EQ(a.k1, predict_all(w, cfg, d, 2).k1);
  for (size_t i = 0; i < 5; ++i) EXPECT_NEAR(a.k1[i], b.k1[i], 1e-6);
  const CoefficientPair one = predict(w, cfg, d.images[3]);
  EXPECT_EQ(one.k1, predict(w, cfg, d.images[3]).k1);
  EXPECT_NEAR(one.k1, a.k1[3], 1e-6);
  EXPECT_NEAR(one.k2, a.k2[3], 1e-6);
  const Predictions c = predict_all(w, cfg, d);
  double mean = 0;
  for (size_t i = 0; i < 5; ++i) mean += split_loss(d.labels[i], {c.k1[i], c.k2[i]}, default_grid()).total;
  EXPECT_NEAR(evaluate_loss(w, cfg, d, default_grid()), mean / 5, 1e-15);
}
