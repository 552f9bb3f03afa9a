#include "gart/model.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>

#include "gart/gten.hpp"
#include "gart/rng.hpp"

namespace gart {

std::vector<int64_t> ModelConfig::modal_layers() const {
  // Reference placement at depth 24, scaled proportionally and deduplicated.
  static const int64_t kRef[4] = {0, 5, 12, 18};
  std::vector<int64_t> out;
  for (int64_t r : kRef) {
    int64_t l = (int64_t)std::llround((double)r * (double)layers / 24.0);
    l = std::min(l, layers - 1);
    if (out.empty() || out.back() != l) out.push_back(l);
  }
  return out;
}

void ModelConfig::validate() const {
  contract_check(layers >= 1, "ModelConfig: layers must be >= 1");
  contract_check(dim >= 1 && heads >= 1 && dim % heads == 0,
                 "ModelConfig: dim must be divisible by heads");
  contract_check(patch >= 1 && image_h >= patch && image_w >= patch &&
                     image_h % patch == 0 && image_w % patch == 0,
                 "ModelConfig: image size must be a multiple of patch");
  contract_check(max_group >= 1, "ModelConfig: max_group must be >= 1");
}

uint64_t ModelConfig::digest() const {
  uint64_t h = 1469598103934665603ull;  // FNV-1a
  auto mix = [&h](uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      h ^= (v >> (8 * i)) & 0xff;
      h *= 1099511628211ull;
    }
  };
  mix((uint64_t)layers);
  mix((uint64_t)dim);
  mix((uint64_t)heads);
  mix((uint64_t)patch);
  mix((uint64_t)image_h);
  mix((uint64_t)image_w);
  mix((uint64_t)max_group);
  mix(init_seed);
  return h;
}

namespace {

// Single traversal order shared by initialization, checkpoints, and the
// optimizer. Any new parameter must be added here.
template <typename T>
void visit_params(
    ModelParams<T>& p, const ModelConfig& cfg,
    const std::function<void(const std::string&, Tensor<T>*)>& fn) {
  fn("embed.patch.w", &p.patch_embed_w);
  fn("embed.patch.b", &p.patch_embed_b);
  fn("embed.pos", &p.pos_embed);
  fn("embed.pose_query", &p.pose_query);
  fn("embed.slot", &p.slot_embed);
  fn("modal_enc.pix.w1", &p.modal_enc.pix_w1);
  fn("modal_enc.pix.b1", &p.modal_enc.pix_b1);
  fn("modal_enc.pix.w2", &p.modal_enc.pix_w2);
  fn("modal_enc.pix.b2", &p.modal_enc.pix_b2);
  fn("modal_enc.pose.w1", &p.modal_enc.pose_w1);
  fn("modal_enc.pose.b1", &p.modal_enc.pose_b1);
  fn("modal_enc.pose.w2", &p.modal_enc.pose_w2);
  fn("modal_enc.pose.b2", &p.modal_enc.pose_b2);
  for (size_t s = 0; s < p.modal.size(); ++s) {
    const std::string base = "modal" + std::to_string(s) + ".";
    fn(base + "wq", &p.modal[s].wq);
    fn(base + "bq", &p.modal[s].bq);
    fn(base + "wk", &p.modal[s].wk);
    fn(base + "bk", &p.modal[s].bk);
    fn(base + "wv", &p.modal[s].wv);
    fn(base + "bv", &p.modal[s].bv);
    fn(base + "out_w", &p.modal[s].out_w);
    fn(base + "out_b", &p.modal[s].out_b);
  }
  auto visit_block = [&](const std::string& base, BlockParams<T>& b) {
    fn(base + "ln1.gamma", &b.ln1.gamma);
    fn(base + "ln1.beta", &b.ln1.beta);
    fn(base + "attn.wq", &b.attn.wq);
    fn(base + "attn.bq", &b.attn.bq);
    fn(base + "attn.wk", &b.attn.wk);
    fn(base + "attn.bk", &b.attn.bk);
    fn(base + "attn.wv", &b.attn.wv);
    fn(base + "attn.bv", &b.attn.bv);
    fn(base + "attn.wo", &b.attn.wo);
    fn(base + "attn.bo", &b.attn.bo);
    fn(base + "ln2.gamma", &b.ln2.gamma);
    fn(base + "ln2.beta", &b.ln2.beta);
    fn(base + "mlp.w1", &b.mlp.w1);
    fn(base + "mlp.b1", &b.mlp.b1);
    fn(base + "mlp.w2", &b.mlp.w2);
    fn(base + "mlp.b2", &b.mlp.b2);
  };
  for (int64_t i = 0; i < cfg.layers; ++i) {
    const std::string li = "layer" + std::to_string(i) + ".";
    visit_block(li + "frame.", p.frame_blocks[(size_t)i]);
    visit_block(li + "global.", p.global_blocks[(size_t)i]);
  }
  fn("final_ln.gamma", &p.final_ln.gamma);
  fn("final_ln.beta", &p.final_ln.beta);
  fn("head.point.w", &p.head_point_w);
  fn("head.point.b", &p.head_point_b);
  fn("head.cam.w", &p.head_cam_w);
  fn("head.cam.b", &p.head_cam_b);
}

template <typename T>
void allocate_params(ModelParams<T>& p, const ModelConfig& cfg) {
  const int64_t d = cfg.dim;
  const int64_t pp = cfg.patch * cfg.patch;
  p.patch_embed_w = Tensor<T>::zeros({pp, d});
  p.patch_embed_b = Tensor<T>::zeros({d});
  p.pos_embed = Tensor<T>::zeros({cfg.patches(), d});
  p.pose_query = Tensor<T>::zeros({1, d});
  p.slot_embed = Tensor<T>::zeros({cfg.max_group, d});
  p.modal_enc.pix_w1 = Tensor<T>::zeros({4, d});
  p.modal_enc.pix_b1 = Tensor<T>::zeros({d});
  p.modal_enc.pix_w2 = Tensor<T>::zeros({d, d});
  p.modal_enc.pix_b2 = Tensor<T>::zeros({d});
  p.modal_enc.pose_w1 = Tensor<T>::zeros({12, d});
  p.modal_enc.pose_b1 = Tensor<T>::zeros({d});
  p.modal_enc.pose_w2 = Tensor<T>::zeros({d, d});
  p.modal_enc.pose_b2 = Tensor<T>::zeros({d});
  p.modal.resize(cfg.modal_layers().size());
  for (auto& m : p.modal) {
    m.wq = Tensor<T>::zeros({d, d});
    m.bq = Tensor<T>::zeros({d});
    m.wk = Tensor<T>::zeros({2 * d, d});
    m.bk = Tensor<T>::zeros({d});
    m.wv = Tensor<T>::zeros({2 * d, d});
    m.bv = Tensor<T>::zeros({d});
    m.out_w = Tensor<T>::zeros({d, d});
    m.out_b = Tensor<T>::zeros({d});
    m.heads = cfg.heads;
  }
  auto alloc_block = [&](BlockParams<T>& b) {
    b.ln1.gamma = Tensor<T>::zeros({d});
    b.ln1.beta = Tensor<T>::zeros({d});
    b.attn.wq = Tensor<T>::zeros({d, d});
    b.attn.bq = Tensor<T>::zeros({d});
    b.attn.wk = Tensor<T>::zeros({d, d});
    b.attn.bk = Tensor<T>::zeros({d});
    b.attn.wv = Tensor<T>::zeros({d, d});
    b.attn.bv = Tensor<T>::zeros({d});
    b.attn.wo = Tensor<T>::zeros({d, d});
    b.attn.bo = Tensor<T>::zeros({d});
    b.attn.heads = cfg.heads;
    b.ln2.gamma = Tensor<T>::zeros({d});
    b.ln2.beta = Tensor<T>::zeros({d});
    b.mlp.w1 = Tensor<T>::zeros({d, 4 * d});
    b.mlp.b1 = Tensor<T>::zeros({4 * d});
    b.mlp.w2 = Tensor<T>::zeros({4 * d, d});
    b.mlp.b2 = Tensor<T>::zeros({d});
  };
  p.frame_blocks.resize((size_t)cfg.layers);
  p.global_blocks.resize((size_t)cfg.layers);
  for (int64_t i = 0; i < cfg.layers; ++i) {
    alloc_block(p.frame_blocks[(size_t)i]);
    alloc_block(p.global_blocks[(size_t)i]);
  }
  p.final_ln.gamma = Tensor<T>::zeros({d});
  p.final_ln.beta = Tensor<T>::zeros({d});
  p.head_point_w = Tensor<T>::zeros({d, pp * 4});
  p.head_point_b = Tensor<T>::zeros({pp * 4});
  p.head_cam_w = Tensor<T>::zeros({d, 12});
  p.head_cam_b = Tensor<T>::zeros({12});
}

bool ends_with(const std::string& s, const std::string& suf) {
  return s.size() >= suf.size() &&
         s.compare(s.size() - suf.size(), suf.size(), suf) == 0;
}

template <typename T>
void init_params(ModelParams<T>& p, const ModelConfig& cfg) {
  Rng rng(cfg.init_seed);
  visit_params<T>(p, cfg, [&](const std::string& name, Tensor<T>* t) {
    T* d = t->mutable_data();
    const int64_t n = t->numel();
    if (ends_with(name, ".gamma")) {
      for (int64_t i = 0; i < n; ++i) d[i] = T(1);
    } else if (name == "embed.pos" || name == "embed.pose_query") {
      for (int64_t i = 0; i < n; ++i) d[i] = (T)(0.02 * rng.gaussian());
    } else if (name == "embed.slot" || ends_with(name, "out_w") ||
               ends_with(name, "out_b")) {
      // Slot embeddings and modal output projections start at zero so both
      // mechanisms are exact no-ops until training engages them.
    } else if (name == "head.point.b") {
      // z channel biased to 1 so initial predictions sit at unit depth.
      for (int64_t i = 2; i < n; i += 4) d[i] = T(1);
    } else if (name == "head.cam.b") {
      d[0] = d[4] = d[8] = T(1);  // vectorized identity rotation
    } else if (t->rank() == 2) {
      const double a = 1.0 / std::sqrt((double)t->dim(0));
      for (int64_t i = 0; i < n; ++i) d[i] = (T)rng.uniform(-a, a);
    }
    // Remaining rank-1 tensors are biases and stay zero.
    t->set_requires_grad(true);
  });
}

}  // namespace

template <typename T>
Model<T>::Model(const ModelConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  allocate_params(params_, cfg_);
  init_params(params_, cfg_);
}

template <typename T>
std::vector<std::pair<std::string, Tensor<T>*>> Model<T>::named_parameters() {
  std::vector<std::pair<std::string, Tensor<T>*>> out;
  visit_params<T>(params_, cfg_, [&](const std::string& n, Tensor<T>* t) {
    out.emplace_back(n, t);
  });
  return out;
}

template <typename T>
std::vector<Tensor<T>*> Model<T>::parameter_list() {
  std::vector<Tensor<T>*> out;
  for (auto& [name, t] : named_parameters()) out.push_back(t);
  return out;
}

template <typename T>
int64_t Model<T>::parameter_count() {
  int64_t n = 0;
  for (Tensor<T>* t : parameter_list()) n += t->numel();
  return n;
}

template <typename T>
void Model<T>::check_frames(const std::vector<FrameBundle>& frames) const {
  contract_check(!frames.empty(), "Model: empty frame list");
  for (const FrameBundle& f : frames) {
    contract_check(f.h == cfg_.image_h && f.w == cfg_.image_w,
                   "Model: frame resolution does not match the config");
    contract_check((int64_t)f.image.size() == f.h * f.w,
                   "Model: image size mismatch");
    if (f.has_depth)
      contract_check((int64_t)f.depth.size() == f.h * f.w &&
                         (int64_t)f.depth_valid.size() == f.h * f.w,
                     "Model: depth size mismatch");
  }
}

template <typename T>
typename Model<T>::Embedded Model<T>::embed_frame(const FrameBundle& f,
                                                  int64_t slot) const {
  contract_check(slot >= 0 && slot < cfg_.max_group,
                 "Model: group position exceeds the slot table");
  const int64_t ps = cfg_.patch, h = cfg_.image_h, w = cfg_.image_w;
  const int64_t gw = w / ps, gh = h / ps;
  const int64_t n_patches = gh * gw;

  Tensor<T> patches = Tensor<T>::zeros({n_patches, ps * ps});
  T* pd = patches.mutable_data();
  for (int64_t py = 0; py < gh; ++py)
    for (int64_t px = 0; px < gw; ++px) {
      const int64_t pi = py * gw + px;
      for (int64_t dy = 0; dy < ps; ++dy)
        for (int64_t dx = 0; dx < ps; ++dx)
          pd[pi * ps * ps + dy * ps + dx] =
              (T)f.image[(size_t)((py * ps + dy) * w + (px * ps + dx))];
    }

  Tensor<T> tok = add(linear(patches, params_.patch_embed_w,
                             params_.patch_embed_b),
                      params_.pos_embed);
  Tensor<T> x = concat_rows<T>({tok, params_.pose_query});
  Tensor<T> srow =
      reshape(slice_rows(params_.slot_embed, slot, slot + 1), {cfg_.dim});
  x = add_rowvec(x, srow);

  ModalObservation obs;
  obs.h = h;
  obs.w = w;
  std::vector<Vec3> rays;
  if (f.has_depth) {
    obs.depth = &f.depth;
    obs.depth_valid = &f.depth_valid;
  }
  if (f.has_intrinsics) {
    rays = local_ray_map(f.intrinsics, h, w);
    obs.rays = &rays;
  }
  if (f.has_pose) {
    obs.has_pose = true;
    obs.pose = f.pose;
  }
  Tensor<T> modal = encode_modalities(obs, params_.modal_enc, ps);
  return {x, modal};
}

template <typename T>
FrameOutput<T> Model<T>::decode_frame(const Tensor<T>& tokens,
                                      int64_t frame_id) const {
  const int64_t ps = cfg_.patch, h = cfg_.image_h, w = cfg_.image_w;
  const int64_t gw = w / ps;
  const int64_t n_patches = cfg_.patches();

  Tensor<T> hn = layer_norm(tokens, params_.final_ln);
  Tensor<T> patch_rows = slice_rows(hn, 0, n_patches);
  Tensor<T> pose_row = slice_rows(hn, n_patches, n_patches + 1);

  Tensor<T> raw =
      linear(patch_rows, params_.head_point_w, params_.head_point_b);
  Tensor<T> flat = reshape(raw, {n_patches * ps * ps, 4});
  std::vector<int64_t> idx((size_t)(h * w));
  for (int64_t y = 0; y < h; ++y)
    for (int64_t x = 0; x < w; ++x) {
      const int64_t pi = (y / ps) * gw + (x / ps);
      idx[(size_t)(y * w + x)] = pi * ps * ps + (y % ps) * ps + (x % ps);
    }
  Tensor<T> pix = gather_rows(flat, idx);  // [h*w, 4] in image order

  FrameOutput<T> out;
  out.frame_id = frame_id;
  out.points = slice_cols(pix, 0, 3);
  out.confidence = add_const(exp_t(slice_cols(pix, 3, 4)), 1.0);
  Tensor<T> cam = linear(pose_row, params_.head_cam_w, params_.head_cam_b);
  out.raw_rotation = reshape(slice_cols(cam, 0, 9), {3, 3});
  out.rotation = orthogonalize_op(out.raw_rotation);
  out.translation = reshape(slice_cols(cam, 9, 12), {3});
  return out;
}

template <typename T>
ModelOutput<T> Model<T>::forward_offline(const std::vector<FrameBundle>& frames,
                                         int64_t group_size) const {
  contract_check(group_size >= 1, "forward_offline: group size must be >= 1");
  const int64_t n = (int64_t)frames.size();
  std::vector<int64_t> parts;
  for (int64_t i = 0; i < n; i += group_size)
    parts.push_back(std::min(group_size, n - i));
  return forward_offline_parts(frames, parts);
}

template <typename T>
ModelOutput<T> Model<T>::forward_offline_parts(
    const std::vector<FrameBundle>& frames,
    const std::vector<int64_t>& parts) const {
  check_frames(frames);
  int64_t total = 0;
  for (int64_t p : parts) {
    contract_check(p >= 1 && p <= cfg_.max_group,
                   "forward_offline: bad group size");
    total += p;
  }
  contract_check(total == (int64_t)frames.size(),
                 "forward_offline: partition does not cover the sequence");

  const int64_t n = (int64_t)frames.size();
  const int64_t tpf = cfg_.tokens_per_frame();
  const std::vector<int64_t> gids = group_ids_from_partition(parts);
  Tensor<T> mask = token_mask_bias<T>(mask_from_group_ids(gids), n, tpf);

  std::vector<Tensor<T>> xs((size_t)n);
  std::vector<Tensor<T>> modal((size_t)n);
  {
    int64_t i = 0;
    for (int64_t p : parts)
      for (int64_t s = 0; s < p; ++s, ++i) {
        Embedded e = embed_frame(frames[(size_t)i], s);
        xs[(size_t)i] = e.x;
        modal[(size_t)i] = e.modal;
      }
  }

  const std::vector<int64_t> stages = cfg_.modal_layers();
  for (int64_t layer = 0; layer < cfg_.layers; ++layer) {
    for (size_t s = 0; s < stages.size(); ++s)
      if (stages[s] == layer)
        for (int64_t i = 0; i < n; ++i)
          xs[(size_t)i] = modal_attention(xs[(size_t)i], modal[(size_t)i],
                                          params_.modal[s]);
    for (int64_t i = 0; i < n; ++i)
      xs[(size_t)i] =
          attention_block(xs[(size_t)i], params_.frame_blocks[(size_t)layer])
              .out;
    Tensor<T> all = concat_rows(xs);
    all = attention_block<T>(all, params_.global_blocks[(size_t)layer],
                             nullptr, &mask)
              .out;
    for (int64_t i = 0; i < n; ++i)
      xs[(size_t)i] = slice_rows(all, i * tpf, (i + 1) * tpf);
  }

  ModelOutput<T> out;
  for (int64_t i = 0; i < n; ++i)
    out.frames.push_back(
        decode_frame(xs[(size_t)i], frames[(size_t)i].frame_id));
  out.steps.push_back(StepStats{n * tpf, 0, 0});
  return out;
}

template <typename T>
std::vector<FrameOutput<T>> Model<T>::step_group(
    const std::vector<const FrameBundle*>& group, KvQueue<T>& cache,
    StepStats* stats) const {
  const int64_t g = (int64_t)group.size();
  const int64_t tpf = cfg_.tokens_per_frame();

  std::vector<Tensor<T>> xs((size_t)g), modal((size_t)g);
  for (int64_t i = 0; i < g; ++i) {
    Embedded e = embed_frame(*group[(size_t)i], i);
    xs[(size_t)i] = e.x;
    modal[(size_t)i] = e.modal;
  }

  std::vector<CachedFrame<T>> pending((size_t)g);
  for (int64_t i = 0; i < g; ++i)
    pending[(size_t)i].frame_id = group[(size_t)i]->frame_id;

  const int64_t cached = cache.cached_tokens();
  const std::vector<int64_t> stages = cfg_.modal_layers();
  for (int64_t layer = 0; layer < cfg_.layers; ++layer) {
    for (size_t s = 0; s < stages.size(); ++s)
      if (stages[s] == layer)
        for (int64_t i = 0; i < g; ++i)
          xs[(size_t)i] = modal_attention(xs[(size_t)i], modal[(size_t)i],
                                          params_.modal[s]);
    for (int64_t i = 0; i < g; ++i)
      xs[(size_t)i] =
          attention_block(xs[(size_t)i], params_.frame_blocks[(size_t)layer])
              .out;

    Tensor<T> all = concat_rows(xs);
    KvRows<T> prefix;
    if (!cache.frames().empty()) {
      std::vector<Tensor<T>> ks, vs;
      for (const CachedFrame<T>& f : cache.frames()) {
        ks.push_back(f.k[(size_t)layer]);
        vs.push_back(f.v[(size_t)layer]);
      }
      prefix.k = concat_rows(ks);
      prefix.v = concat_rows(vs);
    }
    BlockResult<T> res = attention_block<T>(
        all, params_.global_blocks[(size_t)layer],
        prefix.k.defined() ? &prefix : nullptr, nullptr);
    for (int64_t i = 0; i < g; ++i) {
      pending[(size_t)i].k.push_back(
          slice_rows(res.kv.k, i * tpf, (i + 1) * tpf).detach());
      pending[(size_t)i].v.push_back(
          slice_rows(res.kv.v, i * tpf, (i + 1) * tpf).detach());
      xs[(size_t)i] = slice_rows(res.out, i * tpf, (i + 1) * tpf);
    }
  }

  std::vector<FrameOutput<T>> outs;
  for (int64_t i = 0; i < g; ++i)
    outs.push_back(decode_frame(xs[(size_t)i], group[(size_t)i]->frame_id));

  cache.insert_group(std::move(pending));
  if (stats != nullptr) {
    stats->touched_keys = cached + g * tpf;
    stats->cached_frames = (int64_t)cache.frames().size();
    stats->cache_floats = cache.stats().current_floats;
  }
  return outs;
}

namespace {
template <typename T>
ModelOutput<T> stream_parts(const Model<T>& model,
                            const std::vector<FrameBundle>& frames,
                            const std::vector<int64_t>& parts,
                            int64_t queue_capacity, EvictPolicy policy,
                            uint64_t policy_seed) {
  InferenceSession<T> session(model, queue_capacity, policy, policy_seed);
  ModelOutput<T> out;
  size_t pos = 0;
  for (int64_t p : parts) {
    std::vector<FrameBundle> group(frames.begin() + (int64_t)pos,
                                   frames.begin() + (int64_t)pos + p);
    std::vector<FrameOutput<T>> outs = session.step(group);
    for (auto& o : outs) out.frames.push_back(std::move(o));
    out.steps.push_back(session.last_stats());
    pos += (size_t)p;
  }
  return out;
}
}  // namespace

template <typename T>
ModelOutput<T> Model<T>::forward_online(const std::vector<FrameBundle>& frames,
                                        int64_t group_size,
                                        int64_t queue_capacity,
                                        EvictPolicy policy,
                                        uint64_t policy_seed) const {
  check_frames(frames);
  contract_check(group_size >= 1, "forward_online: group size must be >= 1");
  contract_check(queue_capacity <= 0 || group_size <= queue_capacity,
                 "forward_online: group size exceeds queue capacity");
  const int64_t n = (int64_t)frames.size();
  std::vector<int64_t> parts;
  for (int64_t i = 0; i < n; i += group_size)
    parts.push_back(std::min(group_size, n - i));
  return stream_parts(*this, frames, parts, queue_capacity, policy,
                      policy_seed);
}

template <typename T>
ModelOutput<T> Model<T>::forward_hybrid(const std::vector<FrameBundle>& frames,
                                        int64_t prefill_count,
                                        int64_t queue_capacity,
                                        EvictPolicy policy,
                                        uint64_t policy_seed) const {
  check_frames(frames);
  const int64_t n = (int64_t)frames.size();
  contract_check(prefill_count >= 0 && prefill_count <= n,
                 "forward_hybrid: prefill count out of range");
  contract_check(queue_capacity <= 0 || prefill_count <= queue_capacity,
                 "forward_hybrid: prefill exceeds queue capacity");
  std::vector<int64_t> parts;
  if (prefill_count > 0) parts.push_back(prefill_count);
  for (int64_t i = prefill_count; i < n; ++i) parts.push_back(1);
  return stream_parts(*this, frames, parts, queue_capacity, policy,
                      policy_seed);
}

// --- Output helpers ----------------------------------------------------

template <typename T>
PointMap FrameOutput<T>::point_map(int64_t h, int64_t w) const {
  contract_check(points.numel() == h * w * 3,
                 "FrameOutput: point map size mismatch");
  PointMap m;
  m.init(h, w);
  for (int64_t i = 0; i < h * w; ++i) {
    m.pts[(size_t)i] = Vec3{(double)points.data()[i * 3 + 0],
                            (double)points.data()[i * 3 + 1],
                            (double)points.data()[i * 3 + 2]};
    m.valid[(size_t)i] = 1;
  }
  return m;
}

template <typename T>
CameraPose FrameOutput<T>::pose() const {
  CameraPose p;
  for (int i = 0; i < 9; ++i) p.r.m[i] = (double)rotation.data()[i];
  p.t = Vec3{(double)translation.data()[0], (double)translation.data()[1],
             (double)translation.data()[2]};
  return p;
}

template <typename T>
std::vector<PointMap> global_points(const ModelOutput<T>& out,
                                    const std::vector<FrameBundle>& frames,
                                    int64_t anchor) {
  contract_check(anchor >= 0 && anchor < (int64_t)out.frames.size(),
                 "global_points: anchor out of range");
  const CameraPose pa = out.frames[(size_t)anchor].pose();
  std::vector<PointMap> maps;
  for (size_t i = 0; i < out.frames.size(); ++i) {
    const FrameBundle& f = frames[i];
    PointMap local = out.frames[i].point_map(f.h, f.w);
    // Into the anchor camera's frame via the world: local -> world -> anchor.
    PointMap world = global_from_local(local, out.frames[i].pose());
    maps.push_back(local_from_global(world, pa));
  }
  return maps;
}

// --- Checkpoints ----------------------------------------------------------

namespace {
constexpr char kModelMagic[4] = {'G', 'A', 'R', 'G'};
constexpr uint32_t kCheckpointVersion = 2;  // version 1 shares this layout
}  // namespace

template <typename T>
void Model<T>::save(const std::string& path) const {
  std::ofstream os(path, std::ios::binary);
  contract_check(os.good(), "Model::save: cannot open " + path);
  wire::write_magic(os, kModelMagic);
  wire::write_u32(os, kCheckpointVersion);
  wire::write_u64(os, cfg_.digest());
  wire::write_u64(os, (uint64_t)cfg_.layers);
  wire::write_u64(os, (uint64_t)cfg_.dim);
  wire::write_u64(os, (uint64_t)cfg_.heads);
  wire::write_u64(os, (uint64_t)cfg_.patch);
  wire::write_u64(os, (uint64_t)cfg_.image_h);
  wire::write_u64(os, (uint64_t)cfg_.image_w);
  wire::write_u64(os, (uint64_t)cfg_.max_group);
  wire::write_u64(os, cfg_.init_seed);
  wire::write_u32(os, dtype_tag<T>());

  auto named = const_cast<Model<T>*>(this)->named_parameters();
  wire::write_u32(os, (uint32_t)named.size());
  for (auto& [name, t] : named) {
    wire::write_u32(os, (uint32_t)name.size());
    os.write(name.data(), (std::streamsize)name.size());
    save_gten(os, *t);
  }
  contract_check(os.good(), "Model::save: write failed");
}

template <typename T>
Model<T> Model<T>::load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is.good()) throw FormatError("checkpoint: cannot open " + path);
  wire::read_magic(is, kModelMagic, "checkpoint");
  const uint32_t version = wire::read_u32(is, "checkpoint version");
  if (version < 1 || version > kCheckpointVersion)
    throw FormatError("checkpoint: unsupported version " +
                      std::to_string(version));
  if (version < kCheckpointVersion)
    std::fprintf(stderr,
                 "warning: checkpoint version %u is older than current %u; "
                 "loading with the shared layout\n",
                 version, kCheckpointVersion);
  const uint64_t digest = wire::read_u64(is, "checkpoint digest");
  ModelConfig cfg;
  cfg.layers = (int64_t)wire::read_u64(is, "checkpoint layers");
  cfg.dim = (int64_t)wire::read_u64(is, "checkpoint dim");
  cfg.heads = (int64_t)wire::read_u64(is, "checkpoint heads");
  cfg.patch = (int64_t)wire::read_u64(is, "checkpoint patch");
  cfg.image_h = (int64_t)wire::read_u64(is, "checkpoint image_h");
  cfg.image_w = (int64_t)wire::read_u64(is, "checkpoint image_w");
  cfg.max_group = (int64_t)wire::read_u64(is, "checkpoint max_group");
  cfg.init_seed = wire::read_u64(is, "checkpoint init_seed");
  if (cfg.digest() != digest)
    throw FormatError("checkpoint: config digest mismatch");
  const uint32_t dtype = wire::read_u32(is, "checkpoint dtype");
  if (dtype != dtype_tag<T>())
    throw FormatError("checkpoint: dtype mismatch");

  Model<T> model(cfg);
  auto named = model.named_parameters();
  const uint32_t n_params = wire::read_u32(is, "checkpoint param count");
  if (n_params != named.size())
    throw FormatError("checkpoint: parameter count mismatch");
  for (auto& [name, t] : named) {
    const uint32_t len = wire::read_u32(is, "checkpoint name length");
    if (len > 4096) throw FormatError("checkpoint: absurd name length");
    std::string got((size_t)len, '\0');
    is.read(got.data(), (std::streamsize)len);
    if (!is.good()) throw FormatError("checkpoint: truncated name");
    if (got != name)
      throw FormatError("checkpoint: parameter order mismatch at " + got);
    Tensor<T> loaded = load_gten<T>(is);
    if (loaded.shape() != t->shape())
      throw FormatError("checkpoint: shape mismatch at " + name);
    *t = loaded;
    t->set_requires_grad(true);
  }
  return model;
}

// --- Streaming session -----------------------------------------------------

template <typename T>
InferenceSession<T>::InferenceSession(const Model<T>& model,
                                      int64_t queue_capacity,
                                      EvictPolicy policy, uint64_t policy_seed)
    : model_(&model),
      cache_(queue_capacity, policy, model.config().layers, policy_seed) {}

template <typename T>
std::vector<FrameOutput<T>> InferenceSession<T>::step(
    const std::vector<FrameBundle>& group) {
  model_->check_frames(group);
  contract_check((int64_t)group.size() <= model_->config().max_group,
                 "InferenceSession: group exceeds the slot table");
  std::vector<const FrameBundle*> ptrs;
  for (const FrameBundle& f : group) ptrs.push_back(&f);
  return model_->step_group(ptrs, cache_, &stats_);
}

template <typename T>
void InferenceSession<T>::save_cache(std::ostream& os) const {
  cache_.save(os, model_->config().digest());
}

template <typename T>
void InferenceSession<T>::restore_cache(std::istream& is) {
  cache_ = KvQueue<T>::load(is, model_->config().digest());
}

template class Model<float>;
template class Model<double>;
template class InferenceSession<float>;
template class InferenceSession<double>;
template struct FrameOutput<float>;
template struct FrameOutput<double>;
template std::vector<PointMap> global_points<float>(
    const ModelOutput<float>&, const std::vector<FrameBundle>&, int64_t);
template std::vector<PointMap> global_points<double>(
    const ModelOutput<double>&, const std::vector<FrameBundle>&, int64_t);

}  // namespace gart
