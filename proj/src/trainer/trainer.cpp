#include "gart/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "gart/error.hpp"
#include "gart/rng.hpp"

namespace gart {

AdamW::AdamW(std::vector<Tensor64*> params, const AdamWConfig& cfg)
    : params_(std::move(params)), cfg_(cfg) {
  contract_check(cfg_.lr > 0.0, "AdamW: learning rate must be positive");
  contract_check(cfg_.beta1 >= 0.0 && cfg_.beta1 < 1.0 &&
                     cfg_.beta2 >= 0.0 && cfg_.beta2 < 1.0,
                 "AdamW: betas must lie in [0, 1)");
  for (Tensor64* p : params_) {
    contract_check(p != nullptr, "AdamW: null parameter");
    m_.emplace_back(p->numel(), 0.0);
    v_.emplace_back(p->numel(), 0.0);
  }
}

void AdamW::zero_grad() {
  for (Tensor64* p : params_) p->zero_grad();
}

double AdamW::step() {
  double norm_sq = 0.0;
  for (Tensor64* p : params_) {
    if (!p->has_grad()) continue;
    for (double g : p->grad()) norm_sq += g * g;
  }
  const double norm = std::sqrt(norm_sq);
  contract_check(std::isfinite(norm), "AdamW: non-finite gradient norm");
  const double scale =
      (cfg_.clip_norm > 0.0 && norm > cfg_.clip_norm) ? cfg_.clip_norm / norm
                                                      : 1.0;

  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, (double)t_);
  const double bc2 = 1.0 - std::pow(cfg_.beta2, (double)t_);
  for (size_t i = 0; i < params_.size(); ++i) {
    Tensor64& p = *params_[i];
    const bool has = p.has_grad();
    std::vector<double>& m = m_[i];
    std::vector<double>& v = v_[i];
    double* data = p.mutable_data();
    for (int64_t j = 0; j < p.numel(); ++j) {
      const double g = has ? p.grad()[(size_t)j] * scale : 0.0;
      m[(size_t)j] = cfg_.beta1 * m[(size_t)j] + (1.0 - cfg_.beta1) * g;
      v[(size_t)j] = cfg_.beta2 * v[(size_t)j] + (1.0 - cfg_.beta2) * g * g;
      const double mhat = m[(size_t)j] / bc1;
      const double vhat = v[(size_t)j] / bc2;
      data[j] -= cfg_.lr * (mhat / (std::sqrt(vhat) + cfg_.eps) +
                            cfg_.weight_decay * data[j]);
    }
  }
  return norm;
}

FrameBundle frame_bundle_from_scene(const SceneFrame& f, int64_t frame_id,
                                    const FrameModalities& mods,
                                    uint64_t sparsify_seed) {
  FrameBundle b;
  b.frame_id = frame_id;
  b.h = f.depth.h;
  b.w = f.depth.w;
  b.image = f.image;
  if (mods.has_depth) {
    const DepthMap sparse =
        sparsify_depth(f.depth, mods.pattern, sparsify_seed, &f.image);
    b.has_depth = true;
    b.depth = sparse.depth;
    b.depth_valid = sparse.valid;
  }
  if (mods.has_intrinsics) {
    b.has_intrinsics = true;
    b.intrinsics = f.k;
  }
  if (mods.has_pose) {
    b.has_pose = true;
    b.pose = f.pose;
  }
  return b;
}

FrameTruth frame_truth_from_scene(const SceneFrame& f) {
  FrameTruth t;
  t.local = local_points_from_depth(f.depth, f.k);
  t.depth = f.depth.depth;
  t.pose = f.pose;
  return t;
}

void TrainConfig::validate(const ModelConfig& model) const {
  contract_check(steps >= 0, "TrainConfig: negative step count");
  contract_check(n_scenes >= 1, "TrainConfig: need at least one scene");
  contract_check(seq_min >= 1 && seq_min <= seq_max,
                 "TrainConfig: bad sequence length range");
  contract_check(seq_max <= scene_frames,
                 "TrainConfig: sequence longer than pool scenes");
  contract_check(seq_max <= model.max_group,
                 "TrainConfig: group sampling can exceed the slot table");
}

std::string loss_csv_header() {
  return "step,rel_cam,rel_point,abs_point,snormal,normal,total,s_hat,s_gt,"
         "grad_norm\n";
}

std::string loss_csv_row(const LossRow& r) {
  char buf[360];
  std::snprintf(buf, sizeof buf,
                "%lld,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                (long long)r.step, r.rel_cam, r.rel_point, r.abs_point,
                r.snormal, r.normal, r.total, r.s_hat, r.s_gt, r.grad_norm);
  return buf;
}

namespace {

TrainResult train_on_pool(Model<double>& model, const TrainConfig& cfg,
                          const std::vector<SceneSequence>& pool, Rng& master,
                          std::ostream* log) {
  std::vector<std::vector<FrameTruth>> truths;
  for (const SceneSequence& scene : pool) {
    contract_check((int64_t)scene.frames.size() >= cfg.scene_frames,
                   "train: pool scene shorter than scene_frames");
    contract_check(scene.h == model.config().image_h &&
                       scene.w == model.config().image_w,
                   "train: pool scene resolution differs from the model");
    std::vector<FrameTruth> t;
    for (const SceneFrame& f : scene.frames)
      t.push_back(frame_truth_from_scene(f));
    truths.push_back(std::move(t));
  }

  AdamW opt(model.parameter_list(), cfg.opt);
  TrainResult result;
  if (log) *log << loss_csv_header();

  for (int64_t step = 0; step < cfg.steps; ++step) {
    const uint64_t batch_seed = master.next_u64();
    Rng rng(batch_seed);

    const int64_t scene_idx = (int64_t)rng.randint((uint64_t)cfg.n_scenes);
    const int64_t seq_len =
        cfg.seq_min +
        (int64_t)rng.randint((uint64_t)(cfg.seq_max - cfg.seq_min + 1));
    const int64_t start = (int64_t)rng.randint(
        (uint64_t)(cfg.scene_frames - seq_len + 1));
    const int64_t group = 1 + (int64_t)rng.randint((uint64_t)seq_len);
    const uint64_t modality_seed = rng.next_u64();

    const std::vector<FrameModalities> mods =
        sample_modalities(modality_seed, seq_len);
    std::vector<FrameBundle> bundles;
    std::vector<FrameTruth> gt;
    for (int64_t i = 0; i < seq_len; ++i) {
      const uint64_t sparsify_seed = rng.next_u64();
      bundles.push_back(frame_bundle_from_scene(
          pool[(size_t)scene_idx].frames[(size_t)(start + i)], start + i,
          mods[(size_t)i], sparsify_seed));
      gt.push_back(truths[(size_t)scene_idx][(size_t)(start + i)]);
    }
    const uint64_t perm_seed = rng.next_u64();

    const ModelOutput<double> out = model.forward_offline(bundles, group);
    const LossBreakdown<double> loss = total_loss(out.frames, gt, perm_seed);

    LossRow row;
    row.step = step;
    row.rel_cam = loss.rel_cam.data()[0];
    row.rel_point = loss.rel_point.data()[0];
    row.abs_point = loss.abs_point.data()[0];
    row.snormal = loss.snormal.data()[0];
    row.normal = loss.normal.data()[0];
    row.total = loss.total.data()[0];
    row.s_hat = loss.s_hat.data()[0];
    row.s_gt = loss.s_gt;

    if (!std::isfinite(row.total)) {
      std::ostringstream msg;
      msg << "train: non-finite loss at step " << step << " (batch seed "
          << batch_seed << ", scene " << scene_idx << ", start " << start
          << ", len " << seq_len << ", group " << group << ")";
      throw ContractError(msg.str());
    }

    opt.zero_grad();
    backward(loss.total);
    row.grad_norm = opt.step();

    if (log) *log << loss_csv_row(row);
    result.rows.push_back(row);
  }
  return result;
}

}  // namespace

TrainResult train(Model<double>& model, const TrainConfig& cfg,
                  std::ostream* log) {
  cfg.validate(model.config());

  // The pool and every batch come from one linear draw sequence, so a run
  // is reproducible from cfg.seed alone.
  Rng master(cfg.seed);
  std::vector<SceneSequence> pool;
  for (int64_t i = 0; i < cfg.n_scenes; ++i)
    pool.push_back(generate_scene(master.next_u64(), cfg.scene_frames,
                                  model.config().image_h,
                                  model.config().image_w));
  return train_on_pool(model, cfg, pool, master, log);
}

TrainResult train(Model<double>& model, const TrainConfig& cfg,
                  const std::vector<SceneSequence>& scenes,
                  std::ostream* log) {
  cfg.validate(model.config());
  contract_check((int64_t)scenes.size() == cfg.n_scenes,
                 "train: scene pool size differs from n_scenes");

  // Burn the pool's seed draws so the batch stream matches the generating
  // overload draw for draw.
  Rng master(cfg.seed);
  for (int64_t i = 0; i < cfg.n_scenes; ++i) master.next_u64();
  return train_on_pool(model, cfg, scenes, master, log);
}

}  // namespace gart
