#include "gart/attention.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "gart/fdcheck.hpp"
#include "gart/rng.hpp"

namespace gart {
namespace {

Tensor64 rand_tensor(Rng& rng, const Shape& s, double scale = 1.0) {
  Tensor64 t = Tensor64::zeros(s);
  double* d = t.mutable_data();
  for (int64_t i = 0; i < t.numel(); ++i) d[i] = rng.gaussian() * scale;
  return t;
}

AttentionParams<double> rand_attn(Rng& rng, int64_t dim, int64_t dim_kv,
                                  int64_t heads) {
  AttentionParams<double> p;
  p.wq = rand_tensor(rng, {dim, dim}, 0.3);
  p.bq = rand_tensor(rng, {dim}, 0.1);
  p.wk = rand_tensor(rng, {dim_kv, dim}, 0.3);
  p.bk = rand_tensor(rng, {dim}, 0.1);
  p.wv = rand_tensor(rng, {dim_kv, dim}, 0.3);
  p.bv = rand_tensor(rng, {dim}, 0.1);
  p.wo = rand_tensor(rng, {dim, dim}, 0.3);
  p.bo = rand_tensor(rng, {dim}, 0.1);
  p.heads = heads;
  return p;
}

BlockParams<double> rand_block(Rng& rng, int64_t dim, int64_t heads) {
  BlockParams<double> p;
  p.ln1 = {Tensor64::full({dim}, 1.0), Tensor64::zeros({dim})};
  p.ln2 = {Tensor64::full({dim}, 1.0), Tensor64::zeros({dim})};
  // Non-trivial norm parameters so tests exercise their gradient paths too.
  p.ln1.gamma = rand_tensor(rng, {dim}, 0.2);
  double* g = p.ln1.gamma.mutable_data();
  for (int64_t i = 0; i < dim; ++i) g[i] += 1.0;
  p.ln1.beta = rand_tensor(rng, {dim}, 0.1);
  p.attn = rand_attn(rng, dim, dim, heads);
  p.mlp.w1 = rand_tensor(rng, {dim, 2 * dim}, 0.3);
  p.mlp.b1 = rand_tensor(rng, {2 * dim}, 0.1);
  p.mlp.w2 = rand_tensor(rng, {2 * dim, dim}, 0.3);
  p.mlp.b2 = rand_tensor(rng, {dim}, 0.1);
  return p;
}

// --- Masks -------------------------------------------------------------

// Independent oracle phrased as streaming semantics: the frames of the group
// containing i are processed together, so i sees exactly the frames before
// that group's end.
bool oracle_allowed(int64_t i, int64_t j, int64_t n, int64_t g) {
  const int64_t group_end = std::min((i / g + 1) * g, n);
  return j < group_end;
}

TEST(GroupMask, MatchesStreamingOracleExhaustively) {
  for (int64_t n = 0; n <= 8; ++n)
    for (int64_t g = 1; g <= 8; ++g) {
      const std::vector<uint8_t> allow = build_group_causal_mask(n, g);
      ASSERT_EQ((int64_t)allow.size(), n * n);
      for (int64_t i = 0; i < n; ++i)
        for (int64_t j = 0; j < n; ++j)
          EXPECT_EQ(allow[(size_t)(i * n + j)] != 0, oracle_allowed(i, j, n, g))
              << "n=" << n << " g=" << g << " i=" << i << " j=" << j;
    }
}

TEST(GroupMask, FrozenFourFramesGroupsOfTwo) {
  const std::vector<uint8_t> allow = build_group_causal_mask(4, 2);
  const std::vector<uint8_t> expected = {1, 1, 0, 0, 1, 1, 0, 0,
                                         1, 1, 1, 1, 1, 1, 1, 1};
  EXPECT_EQ(allow, expected);
}

TEST(GroupMask, GroupSizeOneIsCausal) {
  const int64_t n = 6;
  const std::vector<uint8_t> allow = build_group_causal_mask(n, 1);
  for (int64_t i = 0; i < n; ++i)
    for (int64_t j = 0; j < n; ++j)
      EXPECT_EQ(allow[(size_t)(i * n + j)], j <= i ? 1 : 0);
}

TEST(GroupMask, FullGroupIsBidirectional) {
  const int64_t n = 5;
  const std::vector<uint8_t> allow = build_group_causal_mask(n, n);
  for (uint8_t a : allow) EXPECT_EQ(a, 1);
}

TEST(GroupMask, PartitionLabels) {
  const std::vector<int64_t> ids = group_ids_from_partition({3, 1, 2});
  const std::vector<int64_t> expected = {1, 1, 1, 2, 3, 3};
  EXPECT_EQ(ids, expected);
  EXPECT_THROW(group_ids_from_partition({2, 0}), ContractError);
}

TEST(GroupMask, RegularLabels) {
  const std::vector<int64_t> ids = group_ids_regular(5, 2);
  const std::vector<int64_t> expected = {1, 1, 2, 2, 3};
  EXPECT_EQ(ids, expected);
  EXPECT_THROW(group_ids_regular(3, 0), ContractError);
}

TEST(GroupMask, TokenBiasExpansion) {
  // Two frames, second group after first, two tokens per frame.
  const std::vector<uint8_t> allow = build_group_causal_mask(2, 1);
  Tensor64 bias = token_mask_bias<double>(allow, 2, 2);
  ASSERT_EQ(bias.shape(), (Shape{4, 4}));
  const double ninf = -std::numeric_limits<double>::infinity();
  for (int64_t i = 0; i < 4; ++i)
    for (int64_t j = 0; j < 4; ++j) {
      const double want = (i / 2 >= j / 2) ? 0.0 : ninf;
      EXPECT_EQ(bias.data()[i * 4 + j], want) << i << "," << j;
    }
}

// --- Attention core ------------------------------------------------------

// Naive multi-head attention written with plain loops, no shared code with
// the graph ops.
std::vector<double> naive_mha(const std::vector<double>& xq, int64_t nq,
                              const std::vector<double>& xkv, int64_t nk,
                              int64_t dim_kv,
                              const AttentionParams<double>& p,
                              const std::vector<uint8_t>* allow) {
  const int64_t dim = p.wq.dim(1);
  const int64_t heads = p.heads;
  const int64_t dh = dim / heads;
  auto project = [&](const std::vector<double>& x, int64_t n, int64_t din,
                     const Tensor64& w, const Tensor64& b) {
    std::vector<double> y((size_t)(n * dim), 0.0);
    for (int64_t i = 0; i < n; ++i)
      for (int64_t o = 0; o < dim; ++o) {
        double s = b.data()[o];
        for (int64_t c = 0; c < din; ++c)
          s += x[(size_t)(i * din + c)] * w.data()[c * dim + o];
        y[(size_t)(i * dim + o)] = s;
      }
    return y;
  };
  const std::vector<double> q = project(xq, nq, dim, p.wq, p.bq);
  const std::vector<double> k = project(xkv, nk, dim_kv, p.wk, p.bk);
  const std::vector<double> v = project(xkv, nk, dim_kv, p.wv, p.bv);

  std::vector<double> concat((size_t)(nq * dim), 0.0);
  const double scale = 1.0 / std::sqrt((double)dh);
  for (int64_t h = 0; h < heads; ++h)
    for (int64_t i = 0; i < nq; ++i) {
      std::vector<double> sc((size_t)nk, -std::numeric_limits<double>::infinity());
      double mx = -std::numeric_limits<double>::infinity();
      for (int64_t j = 0; j < nk; ++j) {
        if (allow != nullptr && !(*allow)[(size_t)(i * nk + j)]) continue;
        double s = 0;
        for (int64_t c = 0; c < dh; ++c)
          s += q[(size_t)(i * dim + h * dh + c)] *
               k[(size_t)(j * dim + h * dh + c)];
        sc[(size_t)j] = s * scale;
        mx = std::max(mx, sc[(size_t)j]);
      }
      double denom = 0;
      std::vector<double> e((size_t)nk, 0.0);
      for (int64_t j = 0; j < nk; ++j) {
        if (std::isinf(sc[(size_t)j])) continue;
        e[(size_t)j] = std::exp(sc[(size_t)j] - mx);
        denom += e[(size_t)j];
      }
      for (int64_t c = 0; c < dh; ++c) {
        double s = 0;
        for (int64_t j = 0; j < nk; ++j)
          s += e[(size_t)j] / denom * v[(size_t)(j * dim + h * dh + c)];
        concat[(size_t)(i * dim + h * dh + c)] = s;
      }
    }

  std::vector<double> out((size_t)(nq * dim), 0.0);
  for (int64_t i = 0; i < nq; ++i)
    for (int64_t o = 0; o < dim; ++o) {
      double s = p.bo.data()[o];
      for (int64_t c = 0; c < dim; ++c)
        s += concat[(size_t)(i * dim + c)] * p.wo.data()[c * dim + o];
      out[(size_t)(i * dim + o)] = s;
    }
  return out;
}

TEST(Attention, MatchesNaiveOracle) {
  Rng rng(11);
  for (int64_t heads : {1, 2}) {
    const int64_t dim = 8, nq = 3, nk = 5;
    AttentionParams<double> p = rand_attn(rng, dim, dim, heads);
    Tensor64 xq = rand_tensor(rng, {nq, dim});
    Tensor64 xkv = rand_tensor(rng, {nk, dim});
    Tensor64 got = multihead_attention(xq, project_kv(xkv, p), p);
    const std::vector<double> want =
        naive_mha(xq.vec(), nq, xkv.vec(), nk, dim, p, nullptr);
    ASSERT_EQ(got.numel(), (int64_t)want.size());
    for (int64_t i = 0; i < got.numel(); ++i)
      EXPECT_NEAR(got.data()[i], want[(size_t)i], 1e-11);
  }
}

TEST(Attention, MaskedMatchesNaiveOracle) {
  Rng rng(12);
  const int64_t dim = 8, n = 4;
  AttentionParams<double> p = rand_attn(rng, dim, dim, 2);
  Tensor64 x = rand_tensor(rng, {n, dim});
  const std::vector<uint8_t> allow = build_group_causal_mask(n, 2);
  Tensor64 bias = token_mask_bias<double>(allow, n, 1);
  Tensor64 got = multihead_attention(x, project_kv(x, p), p, &bias);
  const std::vector<double> want = naive_mha(x.vec(), n, x.vec(), n, dim, p, &allow);
  for (int64_t i = 0; i < got.numel(); ++i)
    EXPECT_NEAR(got.data()[i], want[(size_t)i], 1e-11);
}

// Masking keys out is bit-identical to never supplying them: -inf scores add
// exact zeros in the same summation positions.
TEST(Attention, MaskEqualsKeyTruncationBitExact) {
  Rng rng(13);
  const int64_t dim = 8, n = 5, visible = 3;
  AttentionParams<double> p = rand_attn(rng, dim, dim, 2);
  Tensor64 x = rand_tensor(rng, {n, dim});
  Tensor64 q_in = rand_tensor(rng, {2, dim});

  std::vector<uint8_t> allow((size_t)(2 * n), 0);
  for (int64_t i = 0; i < 2; ++i)
    for (int64_t j = 0; j < visible; ++j) allow[(size_t)(i * n + j)] = 1;
  Tensor64 bias = Tensor64::zeros({2, n});
  double* bd = bias.mutable_data();
  for (int64_t i = 0; i < 2 * n; ++i)
    if (!allow[(size_t)i]) bd[i] = -std::numeric_limits<double>::infinity();

  Tensor64 full = multihead_attention(q_in, project_kv(x, p), p, &bias);
  Tensor64 xs = Tensor64::from_data(
      {visible, dim},
      std::vector<double>(x.vec().begin(), x.vec().begin() + visible * dim));
  Tensor64 trunc = multihead_attention(q_in, project_kv(xs, p), p);
  ASSERT_EQ(full.numel(), trunc.numel());
  for (int64_t i = 0; i < full.numel(); ++i)
    EXPECT_EQ(full.data()[i], trunc.data()[i]);
}

// A block fed cached K/V rows for past tokens reproduces the masked
// full-sequence block bit for bit, for the present and the past rows alike.
TEST(Attention, PrefixRowsEqualMaskedFullSequenceBitExact) {
  Rng rng(14);
  const int64_t dim = 8, n_past = 3, n_cur = 2, n = n_past + n_cur;
  BlockParams<double> p = rand_block(rng, dim, 2);
  Tensor64 x = rand_tensor(rng, {n, dim});

  // Full pass: past = group 1, current = group 2.
  const std::vector<uint8_t> allow =
      mask_from_group_ids(group_ids_from_partition({n_past, n_cur}));
  Tensor64 bias = token_mask_bias<double>(allow, n, 1);
  BlockResult<double> full = attention_block<double>(x, p, nullptr, &bias);

  // Streamed pass: past alone (bidirectional within its group), then the
  // current tokens against the cached rows.
  Tensor64 x_past = slice_rows(x, 0, n_past);
  Tensor64 x_cur = slice_rows(x, n_past, n);
  BlockResult<double> past = attention_block(x_past, p);
  BlockResult<double> cur = attention_block(x_cur, p, &past.kv);

  for (int64_t i = 0; i < n_past * dim; ++i)
    EXPECT_EQ(past.out.data()[i], full.out.data()[i]) << "past row elem " << i;
  for (int64_t i = 0; i < n_cur * dim; ++i)
    EXPECT_EQ(cur.out.data()[i], full.out.data()[n_past * dim + i])
        << "cur row elem " << i;
}

TEST(Attention, BlockPermutationEquivariance) {
  Rng rng(15);
  const int64_t dim = 8, n = 4;
  BlockParams<double> p = rand_block(rng, dim, 2);
  Tensor64 x = rand_tensor(rng, {n, dim});
  BlockResult<double> base = attention_block(x, p);

  const std::vector<int64_t> perm = {2, 0, 3, 1};
  Tensor64 xp = gather_rows(x, perm);
  BlockResult<double> permuted = attention_block(xp, p);
  for (int64_t i = 0; i < n; ++i)
    for (int64_t c = 0; c < dim; ++c)
      EXPECT_NEAR(permuted.out.data()[i * dim + c],
                  base.out.data()[perm[(size_t)i] * dim + c], 1e-12);
}

TEST(Attention, BlockGradient) {
  Rng rng(16);
  const int64_t dim = 6, n = 3;
  BlockParams<double> p = rand_block(rng, dim, 2);
  Tensor64 w = rand_tensor(rng, {n, dim});
  Tensor64 x0 = rand_tensor(rng, {n, dim});
  auto f = [&](const Tensor64& x) {
    return sum_all(mul(attention_block(x, p).out, w));
  };
  EXPECT_LT(fd_check(f, x0, 1e-5), 1e-5);
}

TEST(Attention, BlockParamGradient) {
  Rng rng(17);
  const int64_t dim = 6, n = 3;
  BlockParams<double> p = rand_block(rng, dim, 2);
  Tensor64 w = rand_tensor(rng, {n, dim});
  Tensor64 x = rand_tensor(rng, {n, dim});
  auto f = [&](const Tensor64& wq) {
    BlockParams<double> q = p;
    q.attn.wq = wq;
    return sum_all(mul(attention_block(x, q).out, w));
  };
  EXPECT_LT(fd_check(f, p.attn.wq, 1e-5), 1e-5);
}

TEST(Attention, LayerNormRowsAreStandardized) {
  Rng rng(18);
  const int64_t dim = 16;
  LayerNormParams<double> p{Tensor64::full({dim}, 1.0), Tensor64::zeros({dim})};
  Tensor64 x = rand_tensor(rng, {3, dim}, 5.0);
  Tensor64 y = layer_norm(x, p);
  for (int64_t r = 0; r < 3; ++r) {
    double mean = 0, var = 0;
    for (int64_t c = 0; c < dim; ++c) mean += y.data()[r * dim + c];
    mean /= dim;
    for (int64_t c = 0; c < dim; ++c) {
      const double d = y.data()[r * dim + c] - mean;
      var += d * d;
    }
    var /= dim;
    EXPECT_NEAR(mean, 0.0, 1e-12);
    EXPECT_NEAR(var, 1.0, 1e-4);
  }
}

// --- Modal fusion ---------------------------------------------------------

ModalAttentionParams<double> rand_modal(Rng& rng, int64_t dim, int64_t heads) {
  ModalAttentionParams<double> p;
  p.wq = rand_tensor(rng, {dim, dim}, 0.3);
  p.bq = rand_tensor(rng, {dim}, 0.1);
  p.wk = rand_tensor(rng, {2 * dim, dim}, 0.3);
  p.bk = rand_tensor(rng, {dim}, 0.1);
  p.wv = rand_tensor(rng, {2 * dim, dim}, 0.3);
  p.bv = rand_tensor(rng, {dim}, 0.1);
  p.out_w = Tensor64::zeros({dim, dim});
  p.out_b = Tensor64::zeros({dim});
  p.heads = heads;
  return p;
}

TEST(ModalAttention, IdentityAtInitBitExact) {
  Rng rng(19);
  const int64_t dim = 8, n = 5;
  ModalAttentionParams<double> p = rand_modal(rng, dim, 2);
  Tensor64 x = rand_tensor(rng, {n, dim});
  Tensor64 modal = rand_tensor(rng, {n, dim});
  Tensor64 y = modal_attention(x, modal, p);
  for (int64_t i = 0; i < x.numel(); ++i)
    EXPECT_EQ(y.data()[i], x.data()[i]);
}

TEST(ModalAttention, RespondsToModalOnceProjectionIsNonzero) {
  Rng rng(20);
  const int64_t dim = 8, n = 4;
  ModalAttentionParams<double> p = rand_modal(rng, dim, 2);
  p.out_w = rand_tensor(rng, {dim, dim}, 0.3);
  Tensor64 x = rand_tensor(rng, {n, dim});
  Tensor64 m1 = rand_tensor(rng, {n, dim});
  Tensor64 m2 = rand_tensor(rng, {n, dim});
  Tensor64 y1 = modal_attention(x, m1, p);
  Tensor64 y2 = modal_attention(x, m2, p);
  double diff = 0;
  for (int64_t i = 0; i < y1.numel(); ++i)
    diff = std::max(diff, std::abs(y1.data()[i] - y2.data()[i]));
  EXPECT_GT(diff, 1e-6);
}

TEST(ModalAttention, Gradient) {
  Rng rng(21);
  const int64_t dim = 6, n = 3;
  ModalAttentionParams<double> p = rand_modal(rng, dim, 2);
  p.out_w = rand_tensor(rng, {dim, dim}, 0.3);
  p.out_b = rand_tensor(rng, {dim}, 0.1);
  Tensor64 w = rand_tensor(rng, {n, dim});
  Tensor64 x = rand_tensor(rng, {n, dim});
  Tensor64 modal0 = rand_tensor(rng, {n, dim});
  auto f_modal = [&](const Tensor64& m) {
    return sum_all(mul(modal_attention(x, m, p), w));
  };
  EXPECT_LT(fd_check(f_modal, modal0, 1e-5), 1e-5);
  auto f_x = [&](const Tensor64& xx) {
    return sum_all(mul(modal_attention(xx, modal0, p), w));
  };
  EXPECT_LT(fd_check(f_x, x, 1e-5), 1e-5);
}

// --- Modality encoding -----------------------------------------------------

TEST(RobustStandardize, HandComputedCase) {
  const std::vector<double> x = {1, 2, 3, 4, 100};
  const std::vector<double> out = robust_standardize(x, nullptr);
  // median 3, mean abs deviation (2+1+0+1+97)/5 = 20.2.
  EXPECT_NEAR(out[0], -2.0 / 20.2, 1e-15);
  EXPECT_NEAR(out[2], 0.0, 1e-15);
  EXPECT_NEAR(out[4], 97.0 / 20.2, 1e-15);
}

TEST(RobustStandardize, ValidMaskAndConstantInput) {
  const std::vector<double> x = {5, 7, 9, 1000};
  const std::vector<uint8_t> valid = {1, 1, 1, 0};
  const std::vector<double> out = robust_standardize(x, &valid);
  // Stats over the three valid values: median 7, mad 4/3.
  EXPECT_NEAR(out[0], -2.0 / (4.0 / 3.0), 1e-12);
  EXPECT_EQ(out[3], 0.0);  // invalid encodes as zero

  // Constant inputs hit the deviation floor instead of dividing by zero.
  const std::vector<double> c = {2, 2, 2};
  const std::vector<double> oc = robust_standardize(c, nullptr);
  for (double v : oc) EXPECT_EQ(v, 0.0);

  const std::vector<uint8_t> none = {0, 0, 0, 0};
  for (double v : robust_standardize(x, &none)) EXPECT_EQ(v, 0.0);
}

ModalEncoderParams<double> rand_encoder(Rng& rng, int64_t dim) {
  ModalEncoderParams<double> p;
  p.pix_w1 = rand_tensor(rng, {4, dim}, 0.3);
  p.pix_b1 = rand_tensor(rng, {dim}, 0.1);
  p.pix_w2 = rand_tensor(rng, {dim, dim}, 0.3);
  p.pix_b2 = rand_tensor(rng, {dim}, 0.1);
  p.pose_w1 = rand_tensor(rng, {12, dim}, 0.3);
  p.pose_b1 = rand_tensor(rng, {dim}, 0.1);
  p.pose_w2 = rand_tensor(rng, {dim, dim}, 0.3);
  p.pose_b2 = rand_tensor(rng, {dim}, 0.1);
  return p;
}

TEST(EncodeModalities, ShapeAndAbsentInputs) {
  Rng rng(22);
  const int64_t dim = 8, h = 8, w = 8, patch = 4;
  ModalEncoderParams<double> p = rand_encoder(rng, dim);
  ModalObservation obs;
  obs.h = h;
  obs.w = w;
  Tensor64 tokens = encode_modalities(obs, p, patch);
  ASSERT_EQ(tokens.shape(), (Shape{5, dim}));
  // No pose: the pose token is exactly zero.
  for (int64_t c = 0; c < dim; ++c) EXPECT_EQ(tokens.data()[4 * dim + c], 0.0);
  // All pixel channels zero: every patch token equals every other.
  for (int64_t t = 1; t < 4; ++t)
    for (int64_t c = 0; c < dim; ++c)
      EXPECT_EQ(tokens.data()[t * dim + c], tokens.data()[c]);
}

TEST(EncodeModalities, DepthChangesPatchTokensPoseChangesPoseToken) {
  Rng rng(23);
  const int64_t dim = 8, h = 8, w = 8, patch = 4;
  ModalEncoderParams<double> p = rand_encoder(rng, dim);
  ModalObservation obs;
  obs.h = h;
  obs.w = w;
  Tensor64 base = encode_modalities(obs, p, patch);

  std::vector<double> depth((size_t)(h * w));
  std::vector<uint8_t> dvalid((size_t)(h * w), 1);
  for (auto& d : depth) d = rng.uniform(0.5, 5.0);
  ModalObservation with_depth = obs;
  with_depth.depth = &depth;
  with_depth.depth_valid = &dvalid;
  Tensor64 td = encode_modalities(with_depth, p, patch);
  double dmax = 0;
  for (int64_t i = 0; i < 4 * dim; ++i)
    dmax = std::max(dmax, std::abs(td.data()[i] - base.data()[i]));
  EXPECT_GT(dmax, 1e-6);
  // Pose token untouched by depth.
  for (int64_t c = 0; c < dim; ++c)
    EXPECT_EQ(td.data()[4 * dim + c], base.data()[4 * dim + c]);

  ModalObservation with_pose = obs;
  with_pose.has_pose = true;
  with_pose.pose.t = {0.3, -0.2, 1.0};
  Tensor64 tp = encode_modalities(with_pose, p, patch);
  double pmax = 0;
  for (int64_t c = 0; c < dim; ++c)
    pmax = std::max(
        pmax, std::abs(tp.data()[4 * dim + c] - base.data()[4 * dim + c]));
  EXPECT_GT(pmax, 1e-6);
  // Patch tokens untouched by pose.
  for (int64_t i = 0; i < 4 * dim; ++i)
    EXPECT_EQ(tp.data()[i], base.data()[i]);
}

TEST(EncodeModalities, PatchPoolingIsMeanOfPixels) {
  Rng rng(24);
  const int64_t dim = 4, h = 4, w = 4, patch = 2;
  ModalEncoderParams<double> p = rand_encoder(rng, dim);
  std::vector<double> depth((size_t)(h * w));
  std::vector<uint8_t> dvalid((size_t)(h * w), 1);
  for (auto& d : depth) d = rng.uniform(0.5, 5.0);
  ModalObservation obs;
  obs.h = h;
  obs.w = w;
  obs.depth = &depth;
  obs.depth_valid = &dvalid;
  Tensor64 tokens = encode_modalities(obs, p, patch);

  // Recompute patch 0 by hand: pixels (0,0) (0,1) (1,0) (1,1).
  const std::vector<double> norm = robust_standardize(depth, &dvalid);
  std::vector<double> want(dim, 0.0);
  for (const int64_t pix : {0, 1, 4, 5}) {
    std::vector<double> hdn(dim);
    for (int64_t o = 0; o < dim; ++o) {
      double s = p.pix_b1.data()[o] + norm[(size_t)pix] * p.pix_w1.data()[o];
      // gelu(s)
      const double t =
          0.5 * s * (1.0 + std::erf(s / std::sqrt(2.0)));
      hdn[(size_t)o] = t;
    }
    for (int64_t o = 0; o < dim; ++o) {
      double s = p.pix_b2.data()[o];
      for (int64_t c = 0; c < dim; ++c)
        s += hdn[(size_t)c] * p.pix_w2.data()[c * dim + o];
      want[(size_t)o] += s * 0.25;
    }
  }
  for (int64_t o = 0; o < dim; ++o)
    EXPECT_NEAR(tokens.data()[o], want[(size_t)o], 1e-12);
}

TEST(EncodeModalities, ParamGradient) {
  Rng rng(25);
  const int64_t dim = 4, h = 4, w = 4, patch = 2;
  ModalEncoderParams<double> p = rand_encoder(rng, dim);
  std::vector<double> depth((size_t)(h * w));
  std::vector<uint8_t> dvalid((size_t)(h * w), 1);
  for (auto& d : depth) d = rng.uniform(0.5, 5.0);
  std::vector<Vec3> rays((size_t)(h * w));
  for (auto& r : rays)
    r = Vec3{rng.gaussian(), rng.gaussian(), 1.0 + rng.uniform()}.normalized();
  ModalObservation obs;
  obs.h = h;
  obs.w = w;
  obs.depth = &depth;
  obs.depth_valid = &dvalid;
  obs.rays = &rays;
  obs.has_pose = true;
  obs.pose.t = {0.1, 0.2, 0.3};
  Tensor64 w_ = rand_tensor(rng, {5, dim});
  auto f = [&](const Tensor64& pw1) {
    ModalEncoderParams<double> q = p;
    q.pix_w1 = pw1;
    return sum_all(mul(encode_modalities(obs, q, patch), w_));
  };
  EXPECT_LT(fd_check(f, p.pix_w1, 1e-5), 1e-5);
  auto f_pose = [&](const Tensor64& pw) {
    ModalEncoderParams<double> q = p;
    q.pose_w1 = pw;
    return sum_all(mul(encode_modalities(obs, q, patch), w_));
  };
  EXPECT_LT(fd_check(f_pose, p.pose_w1, 1e-5), 1e-5);
}

// Float instantiation sanity: same graph runs in 32-bit.
TEST(Attention, FloatInstantiationRuns) {
  Rng rng(26);
  const int64_t dim = 8, n = 3;
  AttentionParams<float> p;
  auto randf = [&](const Shape& s) {
    Tensor32 t = Tensor32::zeros(s);
    float* d = t.mutable_data();
    for (int64_t i = 0; i < t.numel(); ++i) d[i] = (float)rng.gaussian();
    return t;
  };
  p.wq = randf({dim, dim});
  p.bq = randf({dim});
  p.wk = randf({dim, dim});
  p.bk = randf({dim});
  p.wv = randf({dim, dim});
  p.bv = randf({dim});
  p.wo = randf({dim, dim});
  p.bo = randf({dim});
  p.heads = 2;
  Tensor32 x = randf({n, dim});
  Tensor32 y = multihead_attention(x, project_kv(x, p), p);
  ASSERT_EQ(y.shape(), (Shape{n, dim}));
  for (int64_t i = 0; i < y.numel(); ++i) EXPECT_TRUE(std::isfinite(y.data()[i]));
}

}  // namespace
}  // namespace gart
