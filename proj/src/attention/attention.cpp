#include "gart/attention.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace gart {

std::vector<int64_t> group_ids_regular(int64_t n_frames, int64_t group_size) {
  contract_check(n_frames >= 0, "group_ids_regular: negative frame count");
  contract_check(group_size >= 1, "group_ids_regular: group size must be >= 1");
  std::vector<int64_t> ids((size_t)n_frames);
  for (int64_t i = 0; i < n_frames; ++i) ids[(size_t)i] = i / group_size + 1;
  return ids;
}

std::vector<int64_t> group_ids_from_partition(const std::vector<int64_t>& parts) {
  std::vector<int64_t> ids;
  int64_t g = 0;
  for (int64_t part : parts) {
    contract_check(part >= 1, "group_ids_from_partition: empty group");
    ++g;
    for (int64_t i = 0; i < part; ++i) ids.push_back(g);
  }
  return ids;
}

std::vector<uint8_t> mask_from_group_ids(const std::vector<int64_t>& group_ids) {
  const int64_t n = (int64_t)group_ids.size();
  std::vector<uint8_t> allow((size_t)(n * n), 0);
  for (int64_t i = 0; i < n; ++i)
    for (int64_t j = 0; j < n; ++j)
      allow[(size_t)(i * n + j)] =
          group_ids[(size_t)j] <= group_ids[(size_t)i] ? 1 : 0;
  return allow;
}

std::vector<uint8_t> build_group_causal_mask(int64_t n_frames,
                                             int64_t group_size) {
  return mask_from_group_ids(group_ids_regular(n_frames, group_size));
}

template <typename T>
Tensor<T> token_mask_bias(const std::vector<uint8_t>& frame_allow,
                          int64_t n_frames, int64_t tokens_per_frame) {
  contract_check((int64_t)frame_allow.size() == n_frames * n_frames,
                 "token_mask_bias: allow matrix size mismatch");
  contract_check(tokens_per_frame >= 1, "token_mask_bias: bad token count");
  const int64_t nt = n_frames * tokens_per_frame;
  const T ninf = -std::numeric_limits<T>::infinity();
  Tensor<T> bias = Tensor<T>::zeros({nt, nt});
  T* b = bias.mutable_data();
  for (int64_t i = 0; i < nt; ++i) {
    const int64_t fi = i / tokens_per_frame;
    for (int64_t j = 0; j < nt; ++j) {
      const int64_t fj = j / tokens_per_frame;
      if (!frame_allow[(size_t)(fi * n_frames + fj)]) b[i * nt + j] = ninf;
    }
  }
  return bias;
}

template <typename T>
KvRows<T> project_kv(const Tensor<T>& x, const AttentionParams<T>& p) {
  return {linear(x, p.wk, p.bk), linear(x, p.wv, p.bv)};
}

template <typename T>
Tensor<T> multihead_attention(const Tensor<T>& q_in, const KvRows<T>& kv,
                              const AttentionParams<T>& p,
                              const Tensor<T>* mask_bias) {
  const int64_t dim = p.wq.dim(1);
  contract_check(p.heads >= 1 && dim % p.heads == 0,
                 "multihead_attention: dim must be divisible by heads");
  const int64_t dh = dim / p.heads;
  const double scale = 1.0 / std::sqrt((double)dh);

  Tensor<T> q = linear(q_in, p.wq, p.bq);
  std::vector<Tensor<T>> head_outs;
  head_outs.reserve((size_t)p.heads);
  for (int64_t h = 0; h < p.heads; ++h) {
    Tensor<T> qh = slice_cols(q, h * dh, (h + 1) * dh);
    Tensor<T> kh = slice_cols(kv.k, h * dh, (h + 1) * dh);
    Tensor<T> vh = slice_cols(kv.v, h * dh, (h + 1) * dh);
    Tensor<T> scores = mul_const(matmul(qh, transpose2d(kh)), scale);
    if (mask_bias != nullptr) scores = add(scores, *mask_bias);
    head_outs.push_back(matmul(softmax_lastdim(scores), vh));
  }
  return linear(concat_cols(head_outs), p.wo, p.bo);
}

template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const LayerNormParams<T>& p) {
  const int64_t k = x.dim(x.rank() - 1);
  Tensor<T> mean = mul_const(sum_lastdim(x), 1.0 / (double)k);
  Tensor<T> xc = sub(x, expand_lastdim(mean, k));
  Tensor<T> var = mul_const(sum_lastdim(mul(xc, xc)), 1.0 / (double)k);
  Tensor<T> std_ = sqrt_t(add_const(var, 1e-5));
  Tensor<T> xn = div(xc, expand_lastdim(std_, k));
  return add_rowvec(mul_rowvec(xn, p.gamma), p.beta);
}

template <typename T>
Tensor<T> mlp(const Tensor<T>& x, const MlpParams<T>& p) {
  return linear(gelu(linear(x, p.w1, p.b1)), p.w2, p.b2);
}

template <typename T>
BlockResult<T> attention_block(const Tensor<T>& x, const BlockParams<T>& p,
                               const KvRows<T>* kv_prefix,
                               const Tensor<T>* mask_bias) {
  Tensor<T> h = layer_norm(x, p.ln1);
  KvRows<T> own = project_kv(h, p.attn);
  KvRows<T> all = own;
  if (kv_prefix != nullptr && kv_prefix->k.defined() &&
      kv_prefix->k.dim(0) > 0) {
    all.k = concat_rows<T>({kv_prefix->k, own.k});
    all.v = concat_rows<T>({kv_prefix->v, own.v});
  }
  Tensor<T> y = add(x, multihead_attention(h, all, p.attn, mask_bias));
  Tensor<T> out = add(y, mlp(layer_norm(y, p.ln2), p.mlp));
  return {out, own};
}

template <typename T>
Tensor<T> modal_attention(const Tensor<T>& x, const Tensor<T>& modal,
                          const ModalAttentionParams<T>& p) {
  contract_check(x.dim(0) == modal.dim(0),
                 "modal_attention: token count mismatch");
  const int64_t dim = p.wq.dim(1);
  contract_check(p.heads >= 1 && dim % p.heads == 0,
                 "modal_attention: dim must be divisible by heads");
  const int64_t dh = dim / p.heads;
  const double scale = 1.0 / std::sqrt((double)dh);

  Tensor<T> kv_in = concat_cols<T>({x, modal});
  Tensor<T> q = linear(x, p.wq, p.bq);
  Tensor<T> k = linear(kv_in, p.wk, p.bk);
  Tensor<T> v = linear(kv_in, p.wv, p.bv);
  std::vector<Tensor<T>> head_outs;
  head_outs.reserve((size_t)p.heads);
  for (int64_t h = 0; h < p.heads; ++h) {
    Tensor<T> qh = slice_cols(q, h * dh, (h + 1) * dh);
    Tensor<T> kh = slice_cols(k, h * dh, (h + 1) * dh);
    Tensor<T> vh = slice_cols(v, h * dh, (h + 1) * dh);
    Tensor<T> scores = mul_const(matmul(qh, transpose2d(kh)), scale);
    head_outs.push_back(matmul(softmax_lastdim(scores), vh));
  }
  Tensor<T> fused = linear(concat_cols(head_outs), p.out_w, p.out_b);
  return add(x, fused);
}

std::vector<double> robust_standardize(const std::vector<double>& x,
                                       const std::vector<uint8_t>* valid) {
  const size_t n = x.size();
  std::vector<double> vals;
  vals.reserve(n);
  for (size_t i = 0; i < n; ++i)
    if (valid == nullptr || (*valid)[i]) vals.push_back(x[i]);
  std::vector<double> out(n, 0.0);
  if (vals.empty()) return out;

  std::sort(vals.begin(), vals.end());
  const size_t m = vals.size();
  const double med = (m % 2 == 1) ? vals[m / 2]
                                  : 0.5 * (vals[m / 2 - 1] + vals[m / 2]);
  double mad = 0.0;
  for (double v : vals) mad += std::abs(v - med);
  mad = std::max(mad / (double)m, 1e-6);
  for (size_t i = 0; i < n; ++i)
    if (valid == nullptr || (*valid)[i]) out[i] = (x[i] - med) / mad;
  return out;
}

template <typename T>
Tensor<T> encode_modalities(const ModalObservation& obs,
                            const ModalEncoderParams<T>& p, int64_t patch) {
  const int64_t h = obs.h, w = obs.w;
  contract_check(h >= 1 && w >= 1 && patch >= 1 && h % patch == 0 &&
                     w % patch == 0,
                 "encode_modalities: image size must be a multiple of patch");
  const int64_t hw = h * w;
  const int64_t gh = h / patch, gw = w / patch;
  const int64_t n_patches = gh * gw;
  const int64_t dim = p.pix_w1.dim(1);

  // Per-pixel channels: standardized depth, standardized ray components.
  // Channels of absent modalities are all zero.
  std::vector<double> chan[4];
  for (auto& c : chan) c.assign((size_t)hw, 0.0);
  if (obs.depth != nullptr) {
    contract_check((int64_t)obs.depth->size() == hw,
                   "encode_modalities: depth size mismatch");
    chan[0] = robust_standardize(*obs.depth, obs.depth_valid);
  }
  if (obs.rays != nullptr) {
    contract_check((int64_t)obs.rays->size() == hw,
                   "encode_modalities: ray map size mismatch");
    std::vector<double> comp((size_t)hw);
    for (int c = 0; c < 3; ++c) {
      for (int64_t i = 0; i < hw; ++i) comp[(size_t)i] = (*obs.rays)[(size_t)i][c];
      chan[c + 1] = robust_standardize(comp, nullptr);
    }
  }

  Tensor<T> pix = Tensor<T>::zeros({hw, 4});
  T* pd = pix.mutable_data();
  for (int64_t i = 0; i < hw; ++i)
    for (int c = 0; c < 4; ++c) pd[i * 4 + c] = (T)chan[c][(size_t)i];

  Tensor<T> feats = linear(gelu(linear(pix, p.pix_w1, p.pix_b1)), p.pix_w2,
                           p.pix_b2);  // [hw, dim]

  // Mean pooling over each patch, expressed as a constant matmul so the
  // gradient path stays inside the op set.
  Tensor<T> pool = Tensor<T>::zeros({n_patches, hw});
  T* pm = pool.mutable_data();
  const T inv = (T)(1.0 / (double)(patch * patch));
  for (int64_t py = 0; py < gh; ++py)
    for (int64_t px = 0; px < gw; ++px) {
      const int64_t pi = py * gw + px;
      for (int64_t dy = 0; dy < patch; ++dy)
        for (int64_t dx = 0; dx < patch; ++dx) {
          const int64_t pixel = (py * patch + dy) * w + (px * patch + dx);
          pm[pi * hw + pixel] = inv;
        }
    }
  Tensor<T> patch_tokens = matmul(pool, feats);  // [n_patches, dim]

  Tensor<T> pose_token;
  if (obs.has_pose) {
    Tensor<T> pose_in = Tensor<T>::zeros({1, 12});
    T* pp = pose_in.mutable_data();
    for (int i = 0; i < 9; ++i) pp[i] = (T)obs.pose.r.m[i];
    pp[9] = (T)obs.pose.t.x;
    pp[10] = (T)obs.pose.t.y;
    pp[11] = (T)obs.pose.t.z;
    pose_token = linear(gelu(linear(pose_in, p.pose_w1, p.pose_b1)), p.pose_w2,
                        p.pose_b2);
  } else {
    pose_token = Tensor<T>::zeros({1, dim});
  }
  return concat_rows<T>({patch_tokens, pose_token});
}

#define GART_INSTANTIATE_ATTENTION(T)                                        \
  template Tensor<T> token_mask_bias<T>(const std::vector<uint8_t>&,         \
                                        int64_t, int64_t);                   \
  template KvRows<T> project_kv<T>(const Tensor<T>&,                         \
                                   const AttentionParams<T>&);               \
  template Tensor<T> multihead_attention<T>(const Tensor<T>&,                \
                                            const KvRows<T>&,                \
                                            const AttentionParams<T>&,       \
                                            const Tensor<T>*);               \
  template Tensor<T> layer_norm<T>(const Tensor<T>&,                         \
                                   const LayerNormParams<T>&);               \
  template Tensor<T> mlp<T>(const Tensor<T>&, const MlpParams<T>&);          \
  template BlockResult<T> attention_block<T>(const Tensor<T>&,               \
                                             const BlockParams<T>&,          \
                                             const KvRows<T>*,               \
                                             const Tensor<T>*);              \
  template Tensor<T> modal_attention<T>(const Tensor<T>&, const Tensor<T>&,  \
                                        const ModalAttentionParams<T>&);     \
  template Tensor<T> encode_modalities<T>(const ModalObservation&,           \
                                          const ModalEncoderParams<T>&,      \
                                          int64_t);

GART_INSTANTIATE_ATTENTION(float)
GART_INSTANTIATE_ATTENTION(double)
#undef GART_INSTANTIATE_ATTENTION

}  // namespace gart
