#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "gart/rng.hpp"
#include "gart/tensor.hpp"

namespace gart {

// Eviction policies for the bounded key/value queue.
//   kFifo:   drop the oldest frame.
//   kRandom: drop a uniformly random retained frame (never the group that is
//            being inserted).
//   kMerge:  average the two oldest frames' K/V rows into one entry kept
//            under the smaller frame id.
//   kStride: drop the frame whose removal makes the retained frame ids most
//            evenly spaced (minimum variance of consecutive id gaps).
enum class EvictPolicy { kFifo, kRandom, kMerge, kStride };

EvictPolicy evict_policy_from_string(const std::string& s);
std::string to_string(EvictPolicy p);

// One cached frame: its per-layer K and V row blocks. Rows are stored
// detached; the cache is an inference-time structure and never participates
// in gradients.
template <typename T>
struct CachedFrame {
  int64_t frame_id = 0;
  std::vector<Tensor<T>> k, v;  // layers entries of [tokens, dim]
};

struct CacheStats {
  int64_t current_floats = 0;  // live K/V scalars across layers
  int64_t peak_floats = 0;
  int64_t peak_frames = 0;
  int64_t evictions = 0;  // dropped frames (merges count once per merge)
  int64_t merges = 0;
};

// Bounded queue of per-frame K/V blocks, one block per layer. Frames are
// kept in insertion order; eviction runs after each group insertion and
// never selects a frame of the group just inserted.
template <typename T>
class KvQueue {
 public:
  // capacity_frames <= 0 means unbounded.
  KvQueue(int64_t capacity_frames, EvictPolicy policy, int64_t layers,
          uint64_t seed);

  // Appends the frames of one group, then evicts down to capacity. Throws
  // ContractError when the group alone exceeds a bounded capacity, or when a
  // frame's layer count does not match the queue's.
  void insert_group(std::vector<CachedFrame<T>> group);

  const std::vector<CachedFrame<T>>& frames() const { return frames_; }
  int64_t layers() const { return layers_; }
  int64_t capacity() const { return capacity_; }
  EvictPolicy policy() const { return policy_; }
  const CacheStats& stats() const { return stats_; }

  // Total cached K rows per layer (every layer holds the same count).
  int64_t cached_tokens() const;

  void clear();

  // "GKVC" snapshot: header with the owning model's config digest plus the
  // queue's own configuration and RNG state, then every frame's K/V blocks.
  // Restoring resumes eviction draw-for-draw. Loading rejects a digest or
  // dtype mismatch with FormatError.
  void save(std::ostream& os, uint64_t config_digest) const;
  static KvQueue<T> load(std::istream& is, uint64_t expected_digest);
  void save_file(const std::string& path, uint64_t config_digest) const;
  static KvQueue<T> load_file(const std::string& path,
                              uint64_t expected_digest);

 private:
  // Removes one frame among indices [0, protect). Precondition: protect >= 1.
  void evict_one(size_t protect);
  void recount();

  int64_t capacity_ = 0;
  EvictPolicy policy_ = EvictPolicy::kFifo;
  int64_t layers_ = 0;
  Rng rng_{0};
  std::vector<CachedFrame<T>> frames_;
  CacheStats stats_;
};

// Gap-variance score used by kStride: n * sum(g^2) - (sum g)^2 over
// consecutive differences of ids, exact in integers. Lower is more even.
int64_t stride_gap_score(const std::vector<int64_t>& ids);

extern template class KvQueue<float>;
extern template class KvQueue<double>;

}  // namespace gart
