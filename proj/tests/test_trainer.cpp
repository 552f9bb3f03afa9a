#include "gart/trainer.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "gart/error.hpp"
#include "gart/ops.hpp"

namespace gart {
namespace {

ModelConfig tiny_model_config() {
  ModelConfig c;
  c.layers = 2;
  c.dim = 32;
  c.heads = 4;
  c.patch = 8;
  c.image_h = 16;
  c.image_w = 16;
  c.max_group = 8;
  c.init_seed = 7;
  return c;
}

TrainConfig tiny_train_config(int64_t steps) {
  TrainConfig t;
  t.steps = steps;
  t.n_scenes = 2;
  t.scene_frames = 5;
  t.seq_min = 2;
  t.seq_max = 3;
  t.seed = 99;
  return t;
}

TEST(AdamW, FirstStepIsSignedLearningRate) {
  // With zeroed moments the bias-corrected first update reduces to
  // lr * g / (|g| + eps) regardless of gradient magnitude.
  Tensor64 x = Tensor64::from_data({2}, {1.0, 2.0});
  x.set_requires_grad(true);
  AdamWConfig cfg;
  cfg.lr = 0.1;
  cfg.clip_norm = 0.0;
  AdamW opt({&x}, cfg);

  opt.zero_grad();
  backward(sum_all(mul(x, x)));  // grad = 2x, all positive
  const double norm = opt.step();
  EXPECT_NEAR(norm, std::sqrt(4.0 + 16.0), 1e-12);
  EXPECT_NEAR(x.data()[0], 1.0 - 0.1, 1e-8);
  EXPECT_NEAR(x.data()[1], 2.0 - 0.1, 1e-8);
}

TEST(AdamW, ClipScalesTheReportedNormDown) {
  Tensor64 x = Tensor64::from_data({1}, {3.0});
  x.set_requires_grad(true);
  AdamWConfig cfg;
  cfg.lr = 0.01;
  cfg.clip_norm = 0.5;
  AdamW opt({&x}, cfg);

  opt.zero_grad();
  backward(mul_const(mul(x, x), 50.0));  // grad = 100 x = 300
  const double norm = opt.step();
  EXPECT_NEAR(norm, 300.0, 1e-9);
  // The sign-step property is clip-invariant; the moments saw g = 0.5.
  EXPECT_NEAR(x.data()[0], 3.0 - 0.01, 1e-8);
}

TEST(AdamW, DecoupledWeightDecayActsOnParameters) {
  Tensor64 x = Tensor64::from_data({1}, {1.0});
  x.set_requires_grad(true);
  AdamWConfig cfg;
  cfg.lr = 0.1;
  cfg.weight_decay = 0.5;
  cfg.clip_norm = 0.0;
  AdamW opt({&x}, cfg);

  opt.zero_grad();
  backward(sum_all(mul(x, x)));
  opt.step();
  EXPECT_NEAR(x.data()[0], 1.0 - 0.1 * (1.0 + 0.5 * 1.0), 1e-8);
}

TEST(AdamW, MinimizesAQuadratic) {
  Tensor64 x = Tensor64::from_data({1}, {-4.0});
  x.set_requires_grad(true);
  AdamWConfig cfg;
  cfg.lr = 0.1;
  AdamW opt({&x}, cfg);
  for (int i = 0; i < 400; ++i) {
    opt.zero_grad();
    const Tensor64 d = add_const(x, -3.0);
    backward(sum_all(mul(d, d)));
    opt.step();
  }
  EXPECT_NEAR(x.data()[0], 3.0, 1e-3);
}

TEST(TrainerData, BundleHonorsModalityFlags) {
  const SceneSequence scene = generate_scene(21, 2, 16, 16);
  const SceneFrame& f = scene.frames[0];

  FrameModalities none;
  const FrameBundle plain = frame_bundle_from_scene(f, 4, none, 1);
  EXPECT_EQ(plain.frame_id, 4);
  EXPECT_EQ(plain.image, f.image);
  EXPECT_FALSE(plain.has_depth);
  EXPECT_FALSE(plain.has_intrinsics);
  EXPECT_FALSE(plain.has_pose);
  EXPECT_TRUE(plain.depth.empty());

  FrameModalities all;
  all.has_depth = true;
  all.has_intrinsics = true;
  all.has_pose = true;
  all.pattern.kind = DepthPattern::kGrid;
  all.pattern.stride = 4;
  const FrameBundle full = frame_bundle_from_scene(f, 0, all, 1);
  EXPECT_TRUE(full.has_depth && full.has_intrinsics && full.has_pose);
  EXPECT_EQ(full.intrinsics.fx, f.k.fx);
  EXPECT_EQ(full.pose.t.x, f.pose.t.x);
  int64_t sparse_count = 0, dense_count = 0;
  for (int64_t i = 0; i < 16 * 16; ++i) {
    if (full.depth_valid[(size_t)i]) {
      ++sparse_count;
      EXPECT_TRUE(f.depth.valid[(size_t)i]);
      EXPECT_EQ(full.depth[(size_t)i], f.depth.depth[(size_t)i]);
    }
    dense_count += f.depth.valid[(size_t)i];
  }
  EXPECT_GT(sparse_count, 0);
  EXPECT_LT(sparse_count, dense_count);

  const FrameTruth t = frame_truth_from_scene(f);
  EXPECT_EQ(t.depth, f.depth.depth);
  EXPECT_EQ(t.local.valid, f.depth.valid);
  EXPECT_EQ(t.pose.t.z, f.pose.t.z);
}

TEST(Train, FixedSeedGivesIdenticalCsv) {
  std::ostringstream a_log, b_log;
  Model<double> a(tiny_model_config());
  train(a, tiny_train_config(4), &a_log);
  Model<double> b(tiny_model_config());
  train(b, tiny_train_config(4), &b_log);
  EXPECT_EQ(a_log.str(), b_log.str());
  EXPECT_NE(a_log.str().find("step,rel_cam,rel_point"), std::string::npos);

  // The two models end bit-identical as well.
  auto pa = a.parameter_list();
  auto pb = b.parameter_list();
  ASSERT_EQ(pa.size(), pb.size());
  for (size_t i = 0; i < pa.size(); ++i)
    for (int64_t j = 0; j < pa[i]->numel(); ++j)
      EXPECT_EQ(pa[i]->data()[j], pb[i]->data()[j]);
}

TEST(Train, PreloadedPoolMatchesGeneratedPool) {
  const TrainConfig cfg = tiny_train_config(3);

  std::ostringstream gen_log;
  Model<double> gen(tiny_model_config());
  train(gen, cfg, &gen_log);

  // Rebuild the pool exactly as the generating overload seeds it.
  Rng master(cfg.seed);
  std::vector<SceneSequence> pool;
  for (int64_t i = 0; i < cfg.n_scenes; ++i)
    pool.push_back(generate_scene(master.next_u64(), cfg.scene_frames, 16, 16));

  std::ostringstream pre_log;
  Model<double> pre(tiny_model_config());
  train(pre, cfg, pool, &pre_log);
  EXPECT_EQ(gen_log.str(), pre_log.str());

  TrainConfig bad = cfg;
  bad.n_scenes = 3;  // pool holds 2
  Model<double> m(tiny_model_config());
  EXPECT_THROW(train(m, bad, pool), ContractError);
}

TEST(Train, ZeroStepsLeavesInitializationUntouched) {
  Model<double> fresh(tiny_model_config());
  Model<double> trained(tiny_model_config());
  const TrainResult r = train(trained, tiny_train_config(0));
  EXPECT_TRUE(r.rows.empty());
  auto pf = fresh.parameter_list();
  auto pt = trained.parameter_list();
  for (size_t i = 0; i < pf.size(); ++i)
    for (int64_t j = 0; j < pf[i]->numel(); ++j)
      EXPECT_EQ(pf[i]->data()[j], pt[i]->data()[j]);
}

TEST(Train, RowsCarryFiniteBreakdownThatSumsToTotal) {
  Model<double> model(tiny_model_config());
  const TrainResult r = train(model, tiny_train_config(3));
  ASSERT_EQ(r.rows.size(), 3u);
  for (const LossRow& row : r.rows) {
    EXPECT_TRUE(std::isfinite(row.total));
    EXPECT_DOUBLE_EQ(
        row.total,
        (((row.rel_cam + row.rel_point) + row.abs_point) + row.snormal) +
            row.normal);
    EXPECT_GT(row.s_hat, 0.0);
    EXPECT_GT(row.s_gt, 0.0);
    EXPECT_GE(row.grad_norm, 0.0);
  }
}

TEST(Train, ExplodingRateAbortsWithBatchSeed) {
  Model<double> model(tiny_model_config());
  TrainConfig cfg = tiny_train_config(40);
  cfg.opt.lr = 1e9;
  cfg.opt.clip_norm = 0.0;
  try {
    train(model, cfg);
    FAIL() << "expected a non-finite loss abort";
  } catch (const ContractError& e) {
    EXPECT_NE(std::string(e.what()).find("batch seed"), std::string::npos);
  }
}

TEST(Train, RejectsContradictoryConfigs) {
  Model<double> model(tiny_model_config());
  TrainConfig cfg = tiny_train_config(1);
  cfg.seq_min = 4;
  cfg.seq_max = 3;
  EXPECT_THROW(train(model, cfg), ContractError);
  cfg = tiny_train_config(1);
  cfg.seq_max = 9;
  cfg.scene_frames = 12;  // exceeds the slot table of max_group = 8
  EXPECT_THROW(train(model, cfg), ContractError);
}

}  // namespace
}  // namespace gart
