#pragma once

#include <cstdint>
#include <vector>

#include "gart/geometry.hpp"
#include "gart/ops.hpp"
#include "gart/tensor.hpp"

namespace gart {

// --- Group-causal masking ------------------------------------------------
//
// Frames are processed in contiguous groups. A frame attends to every frame
// of its own group and of earlier groups, never to a later group. With group
// size 1 this is plain causal attention; with one group covering the whole
// sequence it is full bidirectional attention.

// Group label (1-based) of each frame for regular groups of size g; the last
// group may be short. n >= 0, g >= 1.
std::vector<int64_t> group_ids_regular(int64_t n_frames, int64_t group_size);

// Group labels from an explicit partition, e.g. {3, 1, 2} -> 1 1 1 2 3 3.
// Every part must be >= 1.
std::vector<int64_t> group_ids_from_partition(const std::vector<int64_t>& parts);

// n*n row-major allow matrix: allow[i*n+j] == 1 iff group(j) <= group(i).
std::vector<uint8_t> mask_from_group_ids(const std::vector<int64_t>& group_ids);

// mask_from_group_ids over regular groups.
std::vector<uint8_t> build_group_causal_mask(int64_t n_frames, int64_t group_size);

// Expands a frame-level allow matrix to an additive token-level bias:
// 0 where allowed, -inf where masked, shape [n*tpf, n*tpf]. The result is a
// constant (never requires grad).
template <typename T>
Tensor<T> token_mask_bias(const std::vector<uint8_t>& frame_allow,
                          int64_t n_frames, int64_t tokens_per_frame);

// --- Attention primitives -------------------------------------------------

template <typename T>
struct AttentionParams {
  Tensor<T> wq, bq;  // [dim, dim], [dim]
  Tensor<T> wk, bk;  // [dim_kv, dim], [dim]
  Tensor<T> wv, bv;  // [dim_kv, dim], [dim]
  Tensor<T> wo, bo;  // [dim, dim], [dim]
  int64_t heads = 1;
};

// K/V rows of x under p; callers cache or concatenate these before attending.
template <typename T>
struct KvRows {
  Tensor<T> k, v;  // [n, dim] each
};

template <typename T>
KvRows<T> project_kv(const Tensor<T>& x, const AttentionParams<T>& p);

// Scaled dot-product attention over pre-projected K/V rows, followed by the
// output projection. q_in is projected with wq/bq. mask_bias, when given, is
// a [nq, nk] additive bias (0 / -inf). Keys appear in row order, so
// prepending cached rows reproduces the masked full-sequence computation
// bit for bit when nothing has been evicted.
template <typename T>
Tensor<T> multihead_attention(const Tensor<T>& q_in, const KvRows<T>& kv,
                              const AttentionParams<T>& p,
                              const Tensor<T>* mask_bias = nullptr);

// --- Transformer blocks ----------------------------------------------------

template <typename T>
struct LayerNormParams {
  Tensor<T> gamma, beta;  // [dim]
};

// Per-row layer norm composed from primitive ops, eps = 1e-5.
template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const LayerNormParams<T>& p);

template <typename T>
struct MlpParams {
  Tensor<T> w1, b1;  // [dim, hidden]
  Tensor<T> w2, b2;  // [hidden, dim]
};

// linear -> gelu -> linear.
template <typename T>
Tensor<T> mlp(const Tensor<T>& x, const MlpParams<T>& p);

template <typename T>
struct BlockParams {
  LayerNormParams<T> ln1, ln2;
  AttentionParams<T> attn;
  MlpParams<T> mlp;
};

template <typename T>
struct BlockResult {
  Tensor<T> out;
  // K/V rows of this call's own tokens (projections of ln1(x)), exactly what
  // a cache must hold to resume the sequence later.
  KvRows<T> kv;
};

// Pre-norm block: x + attn(ln1(x)) followed by y + mlp(ln2(y)). Keys are the
// concatenation [kv_prefix, kv(ln1(x))] when a prefix is given, else just the
// block's own rows. mask_bias must match the assembled key count.
template <typename T>
BlockResult<T> attention_block(const Tensor<T>& x, const BlockParams<T>& p,
                               const KvRows<T>* kv_prefix = nullptr,
                               const Tensor<T>* mask_bias = nullptr);

// --- Modal fusion -----------------------------------------------------------

template <typename T>
struct ModalAttentionParams {
  Tensor<T> wq, bq;          // [dim, dim], [dim]
  Tensor<T> wk, bk;          // [2*dim, dim], [dim]
  Tensor<T> wv, bv;          // [2*dim, dim], [dim]
  Tensor<T> out_w, out_b;    // [dim, dim], [dim]; zero-initialized so the
                             // block is the identity until training moves it.
  int64_t heads = 1;
};

// x + proj(attention(q = x, kv = [x | modal])). Queries come from the frame
// tokens, keys and values from the channel-concatenation of frame tokens and
// the frame's modal tokens. Token counts of x and modal must match.
template <typename T>
Tensor<T> modal_attention(const Tensor<T>& x, const Tensor<T>& modal,
                          const ModalAttentionParams<T>& p);

// --- Modality encoding -------------------------------------------------------

// Plain per-frame observations feeding the modal token path. Absent
// modalities stay null / false and encode as zeros.
struct ModalObservation {
  int64_t h = 0, w = 0;
  const std::vector<double>* depth = nullptr;    // h*w, null if absent
  const std::vector<uint8_t>* depth_valid = nullptr;
  const std::vector<Vec3>* rays = nullptr;       // h*w unit rays, null if absent
  bool has_pose = false;
  CameraPose pose;
};

template <typename T>
struct ModalEncoderParams {
  // Per-pixel two-layer MLP over [depth, ray_x, ray_y, ray_z].
  Tensor<T> pix_w1, pix_b1;   // [4, dim], [dim]
  Tensor<T> pix_w2, pix_b2;   // [dim, dim], [dim]
  // Pose MLP over the row-major [R|T] 12-vector.
  Tensor<T> pose_w1, pose_b1;  // [12, dim], [dim]
  Tensor<T> pose_w2, pose_b2;  // [dim, dim], [dim]
};

// Robust per-channel standardization used on raw modality channels before the
// pixel MLP: subtract the median, divide by the mean absolute deviation
// floored at 1e-6. Depth statistics use valid pixels only and invalid pixels
// encode as 0 after normalization.
std::vector<double> robust_standardize(const std::vector<double>& x,
                                       const std::vector<uint8_t>* valid);

// Modal tokens for one frame: one token per patch (mean-pooled pixel MLP
// features) plus a trailing pose token, [tpf, dim] with
// tpf = (h/patch)*(w/patch) + 1. Absent modalities contribute zeros: the
// pixel channels are zero and the pose token is zero when no pose is given.
template <typename T>
Tensor<T> encode_modalities(const ModalObservation& obs,
                            const ModalEncoderParams<T>& p, int64_t patch);

#define GART_EXTERN_ATTENTION(T)                                              \
  extern template Tensor<T> token_mask_bias<T>(const std::vector<uint8_t>&,  \
                                               int64_t, int64_t);            \
  extern template KvRows<T> project_kv<T>(const Tensor<T>&,                  \
                                          const AttentionParams<T>&);        \
  extern template Tensor<T> multihead_attention<T>(                          \
      const Tensor<T>&, const KvRows<T>&, const AttentionParams<T>&,         \
      const Tensor<T>*);                                                     \
  extern template Tensor<T> layer_norm<T>(const Tensor<T>&,                  \
                                          const LayerNormParams<T>&);        \
  extern template Tensor<T> mlp<T>(const Tensor<T>&, const MlpParams<T>&);   \
  extern template BlockResult<T> attention_block<T>(                         \
      const Tensor<T>&, const BlockParams<T>&, const KvRows<T>*,             \
      const Tensor<T>*);                                                     \
  extern template Tensor<T> modal_attention<T>(                              \
      const Tensor<T>&, const Tensor<T>&, const ModalAttentionParams<T>&);   \
  extern template Tensor<T> encode_modalities<T>(                            \
      const ModalObservation&, const ModalEncoderParams<T>&, int64_t);

GART_EXTERN_ATTENTION(float)
GART_EXTERN_ATTENTION(double)
#undef GART_EXTERN_ATTENTION

}  // namespace gart
