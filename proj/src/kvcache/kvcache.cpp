#include "gart/kvcache.hpp"

#include <algorithm>
#include <fstream>
#include <limits>

#include "gart/gten.hpp"

namespace gart {

EvictPolicy evict_policy_from_string(const std::string& s) {
  if (s == "fifo") return EvictPolicy::kFifo;
  if (s == "random") return EvictPolicy::kRandom;
  if (s == "merge") return EvictPolicy::kMerge;
  if (s == "stride") return EvictPolicy::kStride;
  contract_fail("unknown eviction policy: " + s);
}

std::string to_string(EvictPolicy p) {
  switch (p) {
    case EvictPolicy::kFifo: return "fifo";
    case EvictPolicy::kRandom: return "random";
    case EvictPolicy::kMerge: return "merge";
    case EvictPolicy::kStride: return "stride";
  }
  contract_fail("to_string: bad eviction policy value");
}

int64_t stride_gap_score(const std::vector<int64_t>& ids) {
  const int64_t n = (int64_t)ids.size() - 1;
  if (n <= 0) return 0;
  int64_t sum = 0, sum2 = 0;
  for (int64_t i = 0; i < n; ++i) {
    const int64_t g = ids[(size_t)(i + 1)] - ids[(size_t)i];
    sum += g;
    sum2 += g * g;
  }
  return n * sum2 - sum * sum;
}

template <typename T>
KvQueue<T>::KvQueue(int64_t capacity_frames, EvictPolicy policy,
                    int64_t layers, uint64_t seed)
    : capacity_(capacity_frames), policy_(policy), layers_(layers), rng_(seed) {
  contract_check(layers >= 1, "KvQueue: layer count must be >= 1");
}

template <typename T>
int64_t KvQueue<T>::cached_tokens() const {
  int64_t n = 0;
  for (const auto& f : frames_) n += f.k[0].dim(0);
  return n;
}

template <typename T>
void KvQueue<T>::clear() {
  frames_.clear();
  recount();
}

template <typename T>
void KvQueue<T>::recount() {
  int64_t floats = 0;
  for (const auto& f : frames_)
    for (int64_t l = 0; l < layers_; ++l)
      floats += f.k[(size_t)l].numel() + f.v[(size_t)l].numel();
  stats_.current_floats = floats;
  stats_.peak_floats = std::max(stats_.peak_floats, floats);
  stats_.peak_frames = std::max(stats_.peak_frames, (int64_t)frames_.size());
}

template <typename T>
void KvQueue<T>::insert_group(std::vector<CachedFrame<T>> group) {
  if (capacity_ > 0)
    contract_check((int64_t)group.size() <= capacity_,
                   "KvQueue: group larger than cache capacity");
  for (auto& f : group) {
    contract_check((int64_t)f.k.size() == layers_ &&
                       (int64_t)f.v.size() == layers_,
                   "KvQueue: frame layer count mismatch");
    frames_.push_back(std::move(f));
  }
  size_t protect = frames_.size() - group.size();
  recount();  // peak is observed before eviction trims the queue
  if (capacity_ > 0) {
    while ((int64_t)frames_.size() > capacity_) {
      // The group itself fits, so at least one older frame remains.
      evict_one(protect);
      --protect;
    }
  }
  recount();
}

template <typename T>
void KvQueue<T>::evict_one(size_t protect) {
  contract_check(protect >= 1, "KvQueue: nothing evictable");
  switch (policy_) {
    case EvictPolicy::kFifo: {
      frames_.erase(frames_.begin());
      ++stats_.evictions;
      return;
    }
    case EvictPolicy::kRandom: {
      const size_t victim = (size_t)rng_.randint((uint64_t)protect);
      frames_.erase(frames_.begin() + (int64_t)victim);
      ++stats_.evictions;
      return;
    }
    case EvictPolicy::kMerge: {
      if (protect < 2) {
        // A single old frame cannot be merged with anything; drop it.
        frames_.erase(frames_.begin());
        ++stats_.evictions;
        return;
      }
      CachedFrame<T>& a = frames_[0];
      CachedFrame<T>& b = frames_[1];
      CachedFrame<T> merged;
      merged.frame_id = std::min(a.frame_id, b.frame_id);
      merged.k.reserve((size_t)layers_);
      merged.v.reserve((size_t)layers_);
      for (int64_t l = 0; l < layers_; ++l) {
        auto avg = [](const Tensor<T>& x, const Tensor<T>& y) {
          contract_check(x.shape() == y.shape(),
                         "KvQueue: merge shape mismatch");
          Tensor<T> out = Tensor<T>::zeros(x.shape());
          T* o = out.mutable_data();
          for (int64_t i = 0; i < x.numel(); ++i)
            o[i] = (x.data()[i] + y.data()[i]) / T(2);
          return out;
        };
        merged.k.push_back(avg(a.k[(size_t)l], b.k[(size_t)l]));
        merged.v.push_back(avg(a.v[(size_t)l], b.v[(size_t)l]));
      }
      frames_.erase(frames_.begin());
      frames_[0] = std::move(merged);
      ++stats_.evictions;
      ++stats_.merges;
      return;
    }
    case EvictPolicy::kStride: {
      std::vector<int64_t> ids(frames_.size());
      for (size_t i = 0; i < frames_.size(); ++i) ids[i] = frames_[i].frame_id;
      size_t best = 0;
      int64_t best_score = std::numeric_limits<int64_t>::max();
      for (size_t c = 0; c < protect; ++c) {
        std::vector<int64_t> kept;
        kept.reserve(ids.size() - 1);
        for (size_t i = 0; i < ids.size(); ++i)
          if (i != c) kept.push_back(ids[i]);
        const int64_t score = stride_gap_score(kept);
        if (score < best_score) {  // ties keep the earlier (older) candidate
          best_score = score;
          best = c;
        }
      }
      frames_.erase(frames_.begin() + (int64_t)best);
      ++stats_.evictions;
      return;
    }
  }
  contract_fail("KvQueue: bad eviction policy value");
}

namespace {
constexpr char kCacheMagic[4] = {'G', 'K', 'V', 'C'};
constexpr uint32_t kCacheVersion = 1;
}  // namespace

template <typename T>
void KvQueue<T>::save(std::ostream& os, uint64_t config_digest) const {
  wire::write_magic(os, kCacheMagic);
  wire::write_u32(os, kCacheVersion);
  wire::write_u64(os, config_digest);
  wire::write_u32(os, dtype_tag<T>());
  wire::write_u32(os, (uint32_t)policy_);
  wire::write_u64(os, (uint64_t)capacity_);
  wire::write_u32(os, (uint32_t)layers_);
  const Rng::State rs = rng_.save_state();
  wire::write_u64(os, rs.state);
  wire::write_u64(os, rs.has_cached);
  wire::write_f64(os, rs.cached);
  wire::write_u32(os, (uint32_t)frames_.size());
  for (const auto& f : frames_) {
    wire::write_u64(os, (uint64_t)f.frame_id);
    for (int64_t l = 0; l < layers_; ++l) {
      save_gten(os, f.k[(size_t)l]);
      save_gten(os, f.v[(size_t)l]);
    }
  }
  contract_check(os.good(), "KvQueue::save: stream write failed");
}

template <typename T>
KvQueue<T> KvQueue<T>::load(std::istream& is, uint64_t expected_digest) {
  wire::read_magic(is, kCacheMagic, "cache snapshot");
  const uint32_t version = wire::read_u32(is, "cache version");
  if (version != kCacheVersion)
    throw FormatError("cache snapshot: unsupported version " +
                      std::to_string(version));
  const uint64_t digest = wire::read_u64(is, "cache config digest");
  if (digest != expected_digest)
    throw FormatError("cache snapshot: config digest mismatch");
  const uint32_t dtype = wire::read_u32(is, "cache dtype");
  if (dtype != dtype_tag<T>())
    throw FormatError("cache snapshot: dtype mismatch");
  const uint32_t policy = wire::read_u32(is, "cache policy");
  if (policy > (uint32_t)EvictPolicy::kStride)
    throw FormatError("cache snapshot: unknown policy tag");
  const int64_t capacity = (int64_t)wire::read_u64(is, "cache capacity");
  const uint32_t layers = wire::read_u32(is, "cache layers");
  if (layers < 1) throw FormatError("cache snapshot: zero layers");

  KvQueue<T> q(capacity, (EvictPolicy)policy, (int64_t)layers, 0);
  Rng::State rs;
  rs.state = wire::read_u64(is, "cache rng state");
  rs.has_cached = wire::read_u64(is, "cache rng flag");
  rs.cached = wire::read_f64(is, "cache rng cached");
  q.rng_.restore_state(rs);

  const uint32_t n_frames = wire::read_u32(is, "cache frame count");
  for (uint32_t i = 0; i < n_frames; ++i) {
    CachedFrame<T> f;
    f.frame_id = (int64_t)wire::read_u64(is, "cache frame id");
    for (uint32_t l = 0; l < layers; ++l) {
      f.k.push_back(load_gten<T>(is));
      f.v.push_back(load_gten<T>(is));
    }
    q.frames_.push_back(std::move(f));
  }
  q.recount();
  return q;
}

template <typename T>
void KvQueue<T>::save_file(const std::string& path,
                           uint64_t config_digest) const {
  std::ofstream os(path, std::ios::binary);
  contract_check(os.good(), "KvQueue: cannot open for write: " + path);
  save(os, config_digest);
}

template <typename T>
KvQueue<T> KvQueue<T>::load_file(const std::string& path,
                                 uint64_t expected_digest) {
  std::ifstream is(path, std::ios::binary);
  if (!is.good()) throw FormatError("cache snapshot: cannot open " + path);
  return load(is, expected_digest);
}

template class KvQueue<float>;
template class KvQueue<double>;

}  // namespace gart
