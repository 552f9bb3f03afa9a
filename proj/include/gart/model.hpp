#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "gart/attention.hpp"
#include "gart/geometry.hpp"
#include "gart/kvcache.hpp"

namespace gart {

struct ModelConfig {
  int64_t layers = 4;
  int64_t dim = 64;
  int64_t heads = 4;
  int64_t patch = 8;
  int64_t image_h = 32;
  int64_t image_w = 32;
  int64_t max_group = 64;  // slot-embedding table size, bounds group size
  uint64_t init_seed = 0;

  int64_t patches() const { return (image_h / patch) * (image_w / patch); }
  int64_t tokens_per_frame() const { return patches() + 1; }  // + pose token

  // Layers that fuse modal tokens: the reference depth-24 placement
  // [0, 5, 12, 18] mapped proportionally onto this depth, deduplicated.
  // Always starts at layer 0.
  std::vector<int64_t> modal_layers() const;

  void validate() const;
  uint64_t digest() const;
};

// Per-frame inputs. The image is always present; depth, intrinsics, and pose
// are optional modalities.
struct FrameBundle {
  int64_t frame_id = 0;
  int64_t h = 0, w = 0;
  std::vector<double> image;  // h*w grayscale
  bool has_depth = false;
  std::vector<double> depth;         // h*w
  std::vector<uint8_t> depth_valid;  // h*w
  bool has_intrinsics = false;
  Intrinsics intrinsics;
  bool has_pose = false;
  CameraPose pose;
};

template <typename T>
struct FrameOutput {
  int64_t frame_id = 0;
  Tensor<T> points;       // [h*w, 3] local point map, z is predicted depth
  Tensor<T> confidence;   // [h*w, 1], = 1 + exp(raw) >= 1
  Tensor<T> rotation;     // [3, 3], nearest rotation of the raw 9D output
  Tensor<T> translation;  // [3]
  Tensor<T> raw_rotation; // [3, 3] pre-projection head output

  PointMap point_map(int64_t h, int64_t w) const;
  CameraPose pose() const;
};

struct StepStats {
  // K rows read by one layer's global attention this step (cached + current).
  // Every layer touches the same count.
  int64_t touched_keys = 0;
  int64_t cached_frames = 0;  // after the step's insertion
  int64_t cache_floats = 0;   // after the step's insertion
};

template <typename T>
struct ModelOutput {
  std::vector<FrameOutput<T>> frames;
  std::vector<StepStats> steps;  // one per group step; offline: exactly one
};

// Global point maps of every frame expressed in the camera frame of
// frames[anchor], computed from the decoded poses; a presentation choice
// that no loss depends on.
template <typename T>
std::vector<PointMap> global_points(const ModelOutput<T>& out,
                                    const std::vector<FrameBundle>& frames,
                                    int64_t anchor);

template <typename T>
struct ModelParams {
  Tensor<T> patch_embed_w, patch_embed_b;  // [patch^2, dim], [dim]
  Tensor<T> pos_embed;                     // [patches, dim]
  Tensor<T> pose_query;                    // [1, dim]
  Tensor<T> slot_embed;                    // [max_group, dim], zero at init
  ModalEncoderParams<T> modal_enc;
  std::vector<ModalAttentionParams<T>> modal;  // one per fusion stage
  std::vector<BlockParams<T>> frame_blocks;    // one per layer
  std::vector<BlockParams<T>> global_blocks;   // one per layer
  LayerNormParams<T> final_ln;
  Tensor<T> head_point_w, head_point_b;  // [dim, patch^2 * 4]
  Tensor<T> head_cam_w, head_cam_b;      // [dim, 12]
};

template <typename T>
class Model {
 public:
  explicit Model(const ModelConfig& cfg);

  const ModelConfig& config() const { return cfg_; }
  ModelParams<T>& params() { return params_; }
  const ModelParams<T>& params() const { return params_; }

  // Stable-ordered parameter registry; the same order drives initialization,
  // checkpoints, and the optimizer.
  std::vector<std::pair<std::string, Tensor<T>*>> named_parameters();
  std::vector<Tensor<T>*> parameter_list();
  int64_t parameter_count();

  // One masked pass over the whole sequence, bidirectional within groups of
  // group_size and causal across groups.
  ModelOutput<T> forward_offline(const std::vector<FrameBundle>& frames,
                                 int64_t group_size) const;
  ModelOutput<T> forward_offline_parts(const std::vector<FrameBundle>& frames,
                                       const std::vector<int64_t>& parts) const;

  // Streaming: one step per group against the bounded cache.
  // queue_capacity <= 0 means unbounded.
  ModelOutput<T> forward_online(const std::vector<FrameBundle>& frames,
                                int64_t group_size, int64_t queue_capacity,
                                EvictPolicy policy, uint64_t policy_seed) const;

  // Bidirectional prefill over the first prefill_count frames, then
  // singleton online steps.
  ModelOutput<T> forward_hybrid(const std::vector<FrameBundle>& frames,
                                int64_t prefill_count, int64_t queue_capacity,
                                EvictPolicy policy, uint64_t policy_seed) const;

  void save(const std::string& path) const;
  static Model<T> load(const std::string& path);

 private:
  template <typename U>
  friend class InferenceSession;

  struct Embedded {
    Tensor<T> x;      // [tokens_per_frame, dim]
    Tensor<T> modal;  // [tokens_per_frame, dim]
  };
  Embedded embed_frame(const FrameBundle& f, int64_t slot) const;
  FrameOutput<T> decode_frame(const Tensor<T>& tokens, int64_t frame_id) const;
  void check_frames(const std::vector<FrameBundle>& frames) const;

  // Runs one group against the cache: returns outputs and inserts the
  // group's K/V rows. Used by both streaming modes.
  std::vector<FrameOutput<T>> step_group(
      const std::vector<const FrameBundle*>& group, KvQueue<T>& cache,
      StepStats* stats) const;

  ModelConfig cfg_;
  ModelParams<T> params_;
};

// A stateful streaming handle: feed groups one call at a time, snapshot or
// restore the cache between calls.
template <typename T>
class InferenceSession {
 public:
  InferenceSession(const Model<T>& model, int64_t queue_capacity,
                   EvictPolicy policy, uint64_t policy_seed);

  std::vector<FrameOutput<T>> step(const std::vector<FrameBundle>& group);
  const StepStats& last_stats() const { return stats_; }
  const KvQueue<T>& cache() const { return cache_; }

  void save_cache(std::ostream& os) const;
  void restore_cache(std::istream& is);

 private:
  const Model<T>* model_;
  KvQueue<T> cache_;
  StepStats stats_;
};

extern template class Model<float>;
extern template class Model<double>;
extern template class InferenceSession<float>;
extern template class InferenceSession<double>;
extern template std::vector<PointMap> global_points<float>(
    const ModelOutput<float>&, const std::vector<FrameBundle>&, int64_t);
extern template std::vector<PointMap> global_points<double>(
    const ModelOutput<double>&, const std::vector<FrameBundle>&, int64_t);

}  // namespace gart
