#include <gtest/gtest.h>

#include "mocap/training.hpp"

using namespace mocap;

namespace {

DenoiserConfig small(bool multi_view, bool pointmaps = false) {
  DenoiserConfig c;
  c.width = 16;
  c.blocks = 2;
  c.heads = 2;
  c.multi_view = multi_view;
  c.pointmaps = pointmaps;
  c.pointmap_grid = 4;
  c.steps = 20;
  return c;
}

std::vector<TrainingItem> items(int n, const DenoiserConfig& cfg, std::uint64_t seed = 1) {
  std::vector<Sample> s;
  const std::vector<MotionKind> kinds{MotionKind::Walker, MotionKind::Circle};
  for (int i = 0; i < n; ++i)
    s.push_back(generate_indexed_sample(toy8(), kinds, 8, default_rig(), default_augment(), seed, i,
                                        cfg.pointmap_grid));
  return make_training_set(s, cfg.layout(), cfg.pointmaps);
}

}  // namespace

TEST(Training, OneEpochIsFiniteAndLogged) {
  const auto cfg = small(true);
  TransformerNet<float> net(cfg);
  net.init(1);
  TrainConfig tc;
  tc.epochs = 1;
  tc.batch_size = 4;
  const TrainingLog log = train(net, items(10, cfg), TrainStage::FinetuneMV, tc);
  ASSERT_EQ(log.eval_loss.size(), 2u);
  ASSERT_EQ(log.train_loss.size(), 1u);
  EXPECT_TRUE(std::isfinite(log.train_loss[0]));
  EXPECT_TRUE(std::isfinite(log.eval_loss[1]));
}

TEST(Training, ReproducibleLossCurve) {
  const auto cfg = small(true, true);
  const auto data = items(12, cfg);
  TrainConfig tc;
  tc.epochs = 3;
  tc.batch_size = 4;
  tc.seed = 9;
  TransformerNet<float> a(cfg), b(cfg);
  a.init(2);
  b.init(2);
  const auto la = train(a, data, TrainStage::FinetuneMV, tc);
  const auto lb = train(b, data, TrainStage::FinetuneMV, tc);
  EXPECT_EQ(la.eval_loss, lb.eval_loss);
  EXPECT_EQ(la.train_loss, lb.train_loss);
}

TEST(Training, LossDecreases) {
  const auto cfg = small(true);
  TransformerNet<float> net(cfg);
  net.init(3);
  TrainConfig tc;
  tc.epochs = 15;
  tc.batch_size = 8;
  tc.lr = 0.05;
  const auto log = train(net, items(32, cfg), TrainStage::FinetuneMV, tc);
  EXPECT_LT(log.final_loss(), 0.5 * log.initial_loss());
}

TEST(Training, StageModeChecks) {
  const auto mv = small(true), sv = small(false);
  TransformerNet<float> mvnet(mv), svnet(sv);
  mvnet.init(1);
  svnet.init(1);
  TrainConfig tc;
  tc.epochs = 1;
  auto expect_kind = [](auto&& fn) {
    try {
      fn();
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::DatasetModeMismatch);
    }
  };
  expect_kind([&] { train(mvnet, items(4, mv), TrainStage::Pretrain2D, tc); });
  expect_kind([&] { train(svnet, items(4, sv), TrainStage::FinetuneMV, tc); });
  auto pm = small(true, true);
  TransformerNet<float> pmnet(pm);
  pmnet.init(1);
  expect_kind([&] { train(pmnet, items(4, mv), TrainStage::FinetuneMV, tc); });
}

TEST(Training, PretrainedStartBeatsScratchAtEpochZero) {
  const auto sv = small(false), mv = small(true);
  TransformerNet<float> pre(sv);
  pre.init(4);
  TrainConfig tc;
  tc.epochs = 8;
  tc.batch_size = 8;
  tc.lr = 0.05;
  train(pre, items(32, sv), TrainStage::Pretrain2D, tc);

  const auto data = items(16, mv, 2);
  TransformerNet<float> fine(mv), scratch(mv);
  fine.init_from(pre.params(), 5);
  scratch.init(5);
  TrainConfig one = tc;
  one.epochs = 0;
  const auto lf = train(fine, data, TrainStage::FinetuneMV, one);
  const auto ls = train(scratch, data, TrainStage::FinetuneMV, one);
  EXPECT_LE(lf.initial_loss(), ls.initial_loss());
}

TEST(Training, EpochsToTarget) {
  TrainingLog log;
  log.eval_loss = {1.0, 0.8, 0.5, 0.6, 0.4};
  EXPECT_EQ(log.epochs_to(0.5), 2);
  EXPECT_EQ(log.epochs_to(0.1), -1);
  EXPECT_EQ(log.epochs_to(1.0), 0);
}
