#pragma once

// Desk-scale training loop: adaptive-moment updates with decoupled weight
// decay and global gradient-norm clipping, plus the per-step batch sampler
// (scene, crop, group size, modalities, sparsity) that feeds the model from
// synthetic scenes. Every run is a pure function of its seed.

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "gart/losses.hpp"
#include "gart/model.hpp"
#include "gart/synthdata.hpp"

namespace gart {

struct AdamWConfig {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
  double clip_norm = 1.0;  // <= 0 disables clipping
};

// Bias-corrected adaptive-moment optimizer with decoupled decay. One
// parameter group: at this scale no pretrained parameters exist to deserve
// a second learning rate.
class AdamW {
 public:
  AdamW(std::vector<Tensor64*> params, const AdamWConfig& cfg);

  // Clips the global gradient norm in place, applies one update, and
  // returns the pre-clip norm. Parameters without a computed gradient are
  // treated as zero-gradient.
  double step();
  void zero_grad();

  int64_t steps_taken() const { return t_; }

 private:
  std::vector<Tensor64*> params_;
  std::vector<std::vector<double>> m_, v_;
  AdamWConfig cfg_;
  int64_t t_ = 0;
};

// Model input for one frame of a scene, honoring the sampled modality
// flags; depth inputs are sparsified by the frame's pattern. Ground truth
// stays dense regardless.
FrameBundle frame_bundle_from_scene(const SceneFrame& f, int64_t frame_id,
                                    const FrameModalities& mods,
                                    uint64_t sparsify_seed);
FrameTruth frame_truth_from_scene(const SceneFrame& f);

struct TrainConfig {
  int64_t steps = 2000;
  int64_t n_scenes = 32;
  int64_t scene_frames = 8;
  int64_t seq_min = 4;
  int64_t seq_max = 8;
  uint64_t seed = 0;
  AdamWConfig opt;

  void validate(const ModelConfig& model) const;
};

struct LossRow {
  int64_t step = 0;
  double rel_cam = 0, rel_point = 0, abs_point = 0, snormal = 0, normal = 0;
  double total = 0, s_hat = 0, s_gt = 0;
  double grad_norm = 0;
};

struct TrainResult {
  std::vector<LossRow> rows;
};

// Runs cfg.steps optimization steps on the model (64-bit). Per step, one
// scene from the pool, a random crop of seq_min..seq_max frames, a group
// size uniform in [1, seq_len], sampled modalities and sparsity, then
// forward, total loss, backward, update. A non-finite loss aborts with the
// offending batch seed in the message. `log`, when given, receives one CSV
// row per step as training progresses.
TrainResult train(Model<double>& model, const TrainConfig& cfg,
                  std::ostream* log = nullptr);

// Same schedule over a caller-supplied scene pool (cfg.n_scenes must match
// its size). The seed stream is aligned with the generating overload: a
// pool synthesized from the same master seed trains bit-identically.
TrainResult train(Model<double>& model, const TrainConfig& cfg,
                  const std::vector<SceneSequence>& scenes,
                  std::ostream* log = nullptr);

std::string loss_csv_header();
std::string loss_csv_row(const LossRow& row);

}  // namespace gart
