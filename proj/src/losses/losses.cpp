#include "gart/losses.hpp"

#include <cmath>
#include <cstdio>

#include "gart/rng.hpp"

namespace gart {

namespace {

template <typename T>
Tensor<T> const_mat3(const Mat3& m) {
  std::vector<T> v(9);
  for (int i = 0; i < 9; ++i) v[(size_t)i] = (T)m.m[i];
  return Tensor<T>::from_data({3, 3}, v);
}

template <typename T>
Tensor<T> const_col3(const Vec3& t) {
  return Tensor<T>::from_data({3, 1}, {(T)t.x, (T)t.y, (T)t.z});
}

template <typename T>
void check_aligned(const std::vector<FrameOutput<T>>& pred,
                   const std::vector<FrameTruth>& gt) {
  contract_check(!pred.empty() && pred.size() == gt.size(),
                 "losses: prediction/ground-truth frame counts differ");
  for (size_t i = 0; i < gt.size(); ++i) {
    const int64_t hw = gt[i].local.h * gt[i].local.w;
    contract_check((int64_t)gt[i].local.pts.size() == hw &&
                       (int64_t)gt[i].depth.size() == hw,
                   "losses: ground-truth frame has inconsistent sizes");
    contract_check(pred[i].points.rank() == 2 &&
                       pred[i].points.dim(0) == hw &&
                       pred[i].points.dim(1) == 3,
                   "losses: predicted points do not match the frame size");
  }
}

// Differentiable relative pose between two predicted frames:
// R_rel = R_i * R_j^T, t_rel = t_i - R_rel * t_j, as tensors.
template <typename T>
std::pair<Tensor<T>, Tensor<T>> pred_relative(const FrameOutput<T>& fi,
                                              const FrameOutput<T>& fj) {
  Tensor<T> rr = matmul(fi.rotation, transpose2d(fj.rotation));
  Tensor<T> ti = reshape(fi.translation, {3, 1});
  Tensor<T> tj = reshape(fj.translation, {3, 1});
  Tensor<T> rt = sub(ti, matmul(rr, tj));
  return {rr, rt};
}

// Sum over usable normals of (1 - cos) between predicted and ground-truth
// surface normals on one grid, plus how many normals were usable. Forward
// differences define the normal at (y, x) from (y, x+1) and (y+1, x), so the
// last row and column never contribute.
template <typename T>
std::pair<Tensor<T>, int64_t> normal_mismatch_sum(const Tensor<T>& pred_pts,
                                                  const PointMap& gt) {
  const int64_t h = gt.h, w = gt.w;
  if (h < 2 || w < 2) return {Tensor<T>::scalar(T(0)), 0};
  const NormalMap gtn = surface_normals(gt);
  const int64_t m = (h - 1) * (w - 1);

  std::vector<int64_t> i0((size_t)m), ix((size_t)m), iy((size_t)m);
  for (int64_t y = 0; y < h - 1; ++y)
    for (int64_t x = 0; x < w - 1; ++x) {
      const int64_t r = y * (w - 1) + x;
      i0[(size_t)r] = y * w + x;
      ix[(size_t)r] = y * w + x + 1;
      iy[(size_t)r] = (y + 1) * w + x;
    }

  // Predicted cross-product norms decide usability; computed on raw values
  // so the mask itself is not part of the gradient tape.
  const T* pd = pred_pts.data();
  std::vector<uint8_t> usable((size_t)m, 0);
  int64_t count = 0;
  std::vector<T> gt_rows((size_t)(m * 3), T(0));
  std::vector<T> weights;
  for (int64_t r = 0; r < m; ++r) {
    if (!gtn.valid[(size_t)i0[(size_t)r]]) continue;
    auto at = [pd](int64_t row, int c) { return (double)pd[row * 3 + c]; };
    const int64_t r0 = i0[(size_t)r], rx = ix[(size_t)r], ry = iy[(size_t)r];
    const Vec3 a{at(rx, 0) - at(r0, 0), at(rx, 1) - at(r0, 1),
                 at(rx, 2) - at(r0, 2)};
    const Vec3 b{at(ry, 0) - at(r0, 0), at(ry, 1) - at(r0, 1),
                 at(ry, 2) - at(r0, 2)};
    if (a.cross(b).norm() < 1e-12) continue;
    usable[(size_t)r] = 1;
    ++count;
    const Vec3 n = gtn.pts[(size_t)i0[(size_t)r]];
    gt_rows[(size_t)(r * 3 + 0)] = (T)n.x;
    gt_rows[(size_t)(r * 3 + 1)] = (T)n.y;
    gt_rows[(size_t)(r * 3 + 2)] = (T)n.z;
  }
  if (count == 0) return {Tensor<T>::scalar(T(0)), 0};

  Tensor<T> p0 = gather_rows(pred_pts, i0);
  Tensor<T> dx = sub(gather_rows(pred_pts, ix), p0);
  Tensor<T> dy = sub(gather_rows(pred_pts, iy), p0);
  auto col = [](const Tensor<T>& t, int64_t c) {
    return slice_cols(t, c, c + 1);
  };
  Tensor<T> cx = sub(mul(col(dx, 1), col(dy, 2)), mul(col(dx, 2), col(dy, 1)));
  Tensor<T> cy = sub(mul(col(dx, 2), col(dy, 0)), mul(col(dx, 0), col(dy, 2)));
  Tensor<T> cz = sub(mul(col(dx, 0), col(dy, 1)), mul(col(dx, 1), col(dy, 0)));
  Tensor<T> cr = concat_cols<T>({cx, cy, cz});
  Tensor<T> norm = sqrt_t(clamp_min(sum_lastdim(mul(cr, cr)), 1e-24));
  Tensor<T> gtn_t = Tensor<T>::from_data({m, 3}, gt_rows);
  Tensor<T> cosang = div(sum_lastdim(mul(cr, gtn_t)), norm);

  std::vector<T> wv((size_t)m, T(0));
  for (int64_t r = 0; r < m; ++r)
    if (usable[(size_t)r]) wv[(size_t)r] = T(1);
  Tensor<T> wt = Tensor<T>::from_data({m, 1}, wv);
  Tensor<T> sum = sum_all(mul(add_const(neg(cosang), 1.0), wt));
  return {sum, count};
}

}  // namespace

double sequence_scale_gt(const std::vector<FrameTruth>& gt) {
  double acc = 0.0;
  int64_t count = 0;
  for (const FrameTruth& f : gt)
    for (size_t i = 0; i < f.depth.size(); ++i) {
      if (!f.local.valid[i]) continue;
      acc += f.depth[i] * f.depth[i];
      ++count;
    }
  contract_check(count > 0, "sequence_scale_gt: no valid pixels");
  return std::sqrt(acc / (double)count);
}

template <typename T>
Tensor<T> sequence_scale_pred(const std::vector<FrameOutput<T>>& pred,
                              const std::vector<FrameTruth>& gt) {
  check_aligned(pred, gt);
  int64_t total_valid = 0;
  for (const FrameTruth& f : gt)
    for (uint8_t v : f.local.valid) total_valid += v;
  contract_check(total_valid > 0, "sequence_scale_pred: no valid pixels");

  Tensor<T> acc = Tensor<T>::scalar(T(0));
  for (size_t i = 0; i < pred.size(); ++i) {
    const int64_t hw = gt[i].local.h * gt[i].local.w;
    std::vector<T> wv((size_t)hw, T(0));
    for (int64_t p = 0; p < hw; ++p)
      if (gt[i].local.valid[(size_t)p])
        wv[(size_t)p] = T(1.0 / (double)total_valid);
    Tensor<T> wt = Tensor<T>::from_data({hw, 1}, wv);
    Tensor<T> z = slice_cols(pred[i].points, 2, 3);
    acc = add(acc, sum_all(mul(mul(z, z), wt)));
  }
  return sqrt_t(clamp_min(acc, 1e-24));
}

template <typename T>
Tensor<T> loss_rel_cam(const std::vector<FrameOutput<T>>& pred,
                       const std::vector<FrameTruth>& gt,
                       const Tensor<T>& s_hat, double s_gt) {
  const int64_t n = (int64_t)pred.size();
  contract_check(n >= 2, "loss_rel_cam: needs at least two frames");
  contract_check(pred.size() == gt.size(),
                 "loss_rel_cam: frame counts differ");
  contract_check(s_gt > 0, "loss_rel_cam: ground-truth scale must be > 0");

  Tensor<T> acc = Tensor<T>::scalar(T(0));
  for (int64_t i = 0; i < n; ++i)
    for (int64_t j = 0; j < n; ++j) {
      if (i == j) continue;
      auto [rr, rt] = pred_relative(pred[(size_t)i], pred[(size_t)j]);
      const CameraPose rel_gt =
          relative_pose(gt[(size_t)i].pose, gt[(size_t)j].pose);
      // trace(R_hat^T R_gt) as an elementwise product sum.
      Tensor<T> cosang = mul_const(
          add_const(sum_all(mul(rr, const_mat3<T>(rel_gt.r))), -1.0), 0.5);
      Tensor<T> ang = acos_clamped(cosang);
      Tensor<T> tdiff = sub(div_scalar_t(rt, s_hat),
                            const_col3<T>(rel_gt.t * (1.0 / s_gt)));
      Tensor<T> l1 = sum_all(abs_t(tdiff));
      acc = add(acc, add(ang, mul_const(l1, kTranslationWeight)));
    }
  return mul_const(acc, 1.0 / (double)(n * (n - 1)));
}

template <typename T>
Tensor<T> loss_rel_point(const std::vector<FrameOutput<T>>& pred,
                         const std::vector<FrameTruth>& gt,
                         const Tensor<T>& s_hat, double s_gt) {
  check_aligned(pred, gt);
  contract_check(s_gt > 0, "loss_rel_point: ground-truth scale must be > 0");

  int64_t contrib = 0;
  for (const FrameTruth& f : gt) {
    for (uint8_t v : f.local.valid)
      if (v) {
        ++contrib;
        break;
      }
  }
  contract_check(contrib > 0, "loss_rel_point: no frame has valid pixels");

  Tensor<T> acc = Tensor<T>::scalar(T(0));
  for (size_t i = 0; i < pred.size(); ++i) {
    const FrameTruth& f = gt[i];
    const int64_t hw = f.local.h * f.local.w;
    int64_t nv = 0;
    for (uint8_t v : f.local.valid) nv += v;
    if (nv == 0) continue;

    std::vector<T> gtv((size_t)(hw * 3), T(0));
    std::vector<T> wv((size_t)hw, T(0));
    for (int64_t p = 0; p < hw; ++p) {
      if (!f.local.valid[(size_t)p]) continue;
      const Vec3 pt = f.local.pts[(size_t)p];
      gtv[(size_t)(p * 3 + 0)] = (T)(pt.x / s_gt);
      gtv[(size_t)(p * 3 + 1)] = (T)(pt.y / s_gt);
      gtv[(size_t)(p * 3 + 2)] = (T)(pt.z / s_gt);
      contract_check(f.depth[(size_t)p] > 0,
                     "loss_rel_point: valid pixel with nonpositive depth");
      wv[(size_t)p] =
          (T)(1.0 / (f.depth[(size_t)p] * (double)nv * (double)contrib));
    }
    Tensor<T> diff = sub(div_scalar_t(pred[i].points, s_hat),
                         Tensor<T>::from_data({hw, 3}, gtv));
    Tensor<T> l1 = sum_lastdim(abs_t(diff));
    acc = add(acc, sum_all(mul(l1, Tensor<T>::from_data({hw, 1}, wv))));
  }
  return acc;
}

template <typename T>
Tensor<T> loss_abs_point(const std::vector<FrameOutput<T>>& pred,
                         const std::vector<FrameTruth>& gt) {
  check_aligned(pred, gt);
  for (const FrameOutput<T>& f : pred)
    for (int64_t i = 0; i < f.confidence.numel(); ++i)
      contract_check((double)f.confidence.data()[i] >= 1.0,
                     "loss_abs_point: confidence below 1 breaks the "
                     "1 + exp parameterization");

  int64_t contrib = 0;
  for (const FrameTruth& f : gt)
    for (uint8_t v : f.local.valid)
      if (v) {
        ++contrib;
        break;
      }
  contract_check(contrib > 0, "loss_abs_point: no frame has valid pixels");

  Tensor<T> acc = Tensor<T>::scalar(T(0));
  for (size_t i = 0; i < pred.size(); ++i) {
    const FrameTruth& f = gt[i];
    const int64_t hw = f.local.h * f.local.w;
    int64_t nv = 0;
    for (uint8_t v : f.local.valid) nv += v;
    if (nv == 0) continue;

    std::vector<T> gtv((size_t)(hw * 3), T(0));
    std::vector<T> w1((size_t)hw, T(0)), w2((size_t)hw, T(0));
    for (int64_t p = 0; p < hw; ++p) {
      if (!f.local.valid[(size_t)p]) continue;
      const Vec3 pt = f.local.pts[(size_t)p];
      gtv[(size_t)(p * 3 + 0)] = (T)pt.x;
      gtv[(size_t)(p * 3 + 1)] = (T)pt.y;
      gtv[(size_t)(p * 3 + 2)] = (T)pt.z;
      contract_check(f.depth[(size_t)p] > 0,
                     "loss_abs_point: valid pixel with nonpositive depth");
      const double share = 1.0 / ((double)nv * (double)contrib);
      w1[(size_t)p] = (T)(share / f.depth[(size_t)p]);
      w2[(size_t)p] = (T)(share * kConfidencePenalty);
    }
    Tensor<T> l1 = sum_lastdim(abs_t(
        sub(pred[i].points, Tensor<T>::from_data({hw, 3}, gtv))));
    Tensor<T> fit = sum_all(
        mul(mul(l1, pred[i].confidence), Tensor<T>::from_data({hw, 1}, w1)));
    Tensor<T> bonus = sum_all(mul(log_t(pred[i].confidence),
                                  Tensor<T>::from_data({hw, 1}, w2)));
    acc = add(acc, sub(fit, bonus));
  }
  return acc;
}

template <typename T>
Tensor<T> loss_normal(const std::vector<FrameOutput<T>>& pred,
                      const std::vector<FrameTruth>& gt) {
  check_aligned(pred, gt);
  std::vector<Tensor<T>> sums;
  int64_t total = 0;
  for (size_t i = 0; i < pred.size(); ++i) {
    auto [sum, count] = normal_mismatch_sum(pred[i].points, gt[i].local);
    if (count > 0) sums.push_back(sum);
    total += count;
  }
  if (total < 4) {
    std::fprintf(stderr,
                 "warning: normal loss skipped, only %lld usable normals\n",
                 (long long)total);
    return Tensor<T>::scalar(T(0));
  }
  Tensor<T> acc = Tensor<T>::scalar(T(0));
  for (const Tensor<T>& s : sums) acc = add(acc, s);
  return mul_const(acc, 1.0 / (double)total);
}

std::vector<int64_t> shuffle_permutation(int64_t n, uint64_t seed) {
  std::vector<int64_t> perm((size_t)n);
  for (int64_t i = 0; i < n; ++i) perm[(size_t)i] = i;
  Rng rng(seed);
  for (int64_t i = n - 1; i > 0; --i) {
    const int64_t j = (int64_t)rng.randint((uint64_t)(i + 1));
    std::swap(perm[(size_t)i], perm[(size_t)j]);
  }
  return perm;
}

template <typename T>
Tensor<T> loss_shuffled_normal_with_perm(
    const std::vector<FrameOutput<T>>& pred,
    const std::vector<FrameTruth>& gt, const std::vector<int64_t>& perm) {
  check_aligned(pred, gt);
  const int64_t n = (int64_t)pred.size();
  const int64_t h = gt[0].local.h, w = gt[0].local.w;
  for (const FrameTruth& f : gt)
    contract_check(f.local.h == h && f.local.w == w,
                   "loss_shuffled_normal: frames must share a resolution");
  contract_check((int64_t)perm.size() == n * h * w,
                 "loss_shuffled_normal: permutation size mismatch");

  // Both maps move into the first frame's camera. Only relative poses enter,
  // so the choice of that frame cannot affect the value.
  std::vector<Tensor<T>> pred_maps;
  PointMap gt_all;
  gt_all.init(n * h, w);
  Tensor<T> r0 = pred[0].rotation;
  Tensor<T> t0 = reshape(pred[0].translation, {3, 1});
  for (int64_t i = 0; i < n; ++i) {
    Tensor<T> rel_r = matmul(r0, transpose2d(pred[(size_t)i].rotation));
    Tensor<T> rel_t =
        sub(t0, matmul(rel_r, reshape(pred[(size_t)i].translation, {3, 1})));
    pred_maps.push_back(add_rowvec(
        matmul(pred[(size_t)i].points, transpose2d(rel_r)),
        reshape(rel_t, {3})));

    const CameraPose rel_gt = relative_pose(gt[0].pose, gt[(size_t)i].pose);
    for (int64_t p = 0; p < h * w; ++p) {
      const size_t src = (size_t)p;
      const size_t dst = (size_t)(i * h * w + p);
      gt_all.valid[dst] = gt[(size_t)i].local.valid[src];
      if (gt_all.valid[dst])
        gt_all.pts[dst] = apply_pose(rel_gt, gt[(size_t)i].local.pts[src]);
    }
  }
  Tensor<T> pred_all = concat_rows(pred_maps);

  // One shared permutation, then a virtual grid of the same width; any
  // leftover pixels fall off the end.
  const int64_t vh = (n * h * w) / w, vw = w;
  const int64_t kept = vh * vw;
  Tensor<T> pred_grid = slice_rows(gather_rows(pred_all, perm), 0, kept);
  PointMap gt_grid;
  gt_grid.init(vh, vw);
  for (int64_t p = 0; p < kept; ++p) {
    gt_grid.pts[(size_t)p] = gt_all.pts[(size_t)perm[(size_t)p]];
    gt_grid.valid[(size_t)p] = gt_all.valid[(size_t)perm[(size_t)p]];
  }

  auto [sum, count] = normal_mismatch_sum(pred_grid, gt_grid);
  if (count < 4) {
    std::fprintf(
        stderr,
        "warning: shuffled normal loss skipped, only %lld usable normals\n",
        (long long)count);
    return Tensor<T>::scalar(T(0));
  }
  return mul_const(sum, 1.0 / (double)count);
}

template <typename T>
Tensor<T> loss_shuffled_normal(const std::vector<FrameOutput<T>>& pred,
                               const std::vector<FrameTruth>& gt,
                               uint64_t perm_seed) {
  check_aligned(pred, gt);
  const int64_t total = (int64_t)pred.size() * gt[0].local.h * gt[0].local.w;
  return loss_shuffled_normal_with_perm(pred, gt,
                                        shuffle_permutation(total, perm_seed));
}

template <typename T>
LossBreakdown<T> total_loss(const std::vector<FrameOutput<T>>& pred,
                            const std::vector<FrameTruth>& gt,
                            uint64_t perm_seed) {
  LossBreakdown<T> b;
  b.s_gt = sequence_scale_gt(gt);
  b.s_hat = sequence_scale_pred(pred, gt);
  b.rel_cam = loss_rel_cam(pred, gt, b.s_hat, b.s_gt);
  b.rel_point = loss_rel_point(pred, gt, b.s_hat, b.s_gt);
  b.abs_point = loss_abs_point(pred, gt);
  b.snormal = loss_shuffled_normal(pred, gt, perm_seed);
  b.normal = loss_normal(pred, gt);
  b.total = add(add(add(add(b.rel_cam, b.rel_point), b.abs_point), b.snormal),
                b.normal);
  return b;
}

template <typename T>
std::vector<FrameOutput<T>> transform_pred_poses(
    const std::vector<FrameOutput<T>>& pred, const CameraPose& w) {
  std::vector<FrameOutput<T>> out;
  for (const FrameOutput<T>& f : pred) {
    FrameOutput<T> g = f;
    // pose' = pose composed with w: R' = R * W_r, t' = R * w_t + t.
    g.rotation = matmul(f.rotation, const_mat3<T>(w.r));
    g.translation = add(
        reshape(matmul(f.rotation, const_col3<T>(w.t)), {3}), f.translation);
    out.push_back(std::move(g));
  }
  return out;
}

#define GART_INSTANTIATE_LOSSES(T)                                            \
  template Tensor<T> sequence_scale_pred<T>(                                  \
      const std::vector<FrameOutput<T>>&, const std::vector<FrameTruth>&);    \
  template Tensor<T> loss_rel_cam<T>(const std::vector<FrameOutput<T>>&,      \
                                     const std::vector<FrameTruth>&,          \
                                     const Tensor<T>&, double);               \
  template Tensor<T> loss_rel_point<T>(const std::vector<FrameOutput<T>>&,    \
                                       const std::vector<FrameTruth>&,        \
                                       const Tensor<T>&, double);             \
  template Tensor<T> loss_abs_point<T>(const std::vector<FrameOutput<T>>&,    \
                                       const std::vector<FrameTruth>&);       \
  template Tensor<T> loss_normal<T>(const std::vector<FrameOutput<T>>&,       \
                                    const std::vector<FrameTruth>&);          \
  template Tensor<T> loss_shuffled_normal<T>(                                 \
      const std::vector<FrameOutput<T>>&, const std::vector<FrameTruth>&,     \
      uint64_t);                                                              \
  template Tensor<T> loss_shuffled_normal_with_perm<T>(                       \
      const std::vector<FrameOutput<T>>&, const std::vector<FrameTruth>&,     \
      const std::vector<int64_t>&);                                           \
  template LossBreakdown<T> total_loss<T>(const std::vector<FrameOutput<T>>&, \
                                          const std::vector<FrameTruth>&,     \
                                          uint64_t);                          \
  template std::vector<FrameOutput<T>> transform_pred_poses<T>(               \
      const std::vector<FrameOutput<T>>&, const CameraPose&);

GART_INSTANTIATE_LOSSES(float)
GART_INSTANTIATE_LOSSES(double)
#undef GART_INSTANTIATE_LOSSES

}  // namespace gart
