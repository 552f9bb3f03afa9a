#pragma once

// The five-term scale-adaptive training objective. Every term is assembled
// from taped tensor ops, so gradients flow into predicted points, confidence,
// rotations, and translations. Ground truth enters as constants.
//
// Scale handling: predictions are compared in their own scale s_hat (RMS of
// predicted z over ground-truth-valid pixels) against ground truth in its
// scale s_gt for the relative terms, while the absolute term compares raw
// coordinates. That split is what lets metric scale emerge from training.

#include <cstdint>
#include <vector>

#include "gart/geometry.hpp"
#include "gart/model.hpp"
#include "gart/ops.hpp"
#include "gart/tensor.hpp"

namespace gart {

// Ground truth for one frame, aligned pixel-for-pixel with the prediction.
// depth holds the frame's depth values; local.valid is the single validity
// mask shared by points and depth.
struct FrameTruth {
  PointMap local;
  std::vector<double> depth;
  CameraPose pose;
};

template <typename T>
struct LossBreakdown {
  Tensor<T> rel_cam, rel_point, abs_point, snormal, normal;
  Tensor<T> total;  // rel_cam + rel_point + abs_point + snormal + normal
  Tensor<T> s_hat;
  double s_gt = 0.0;
};

constexpr double kTranslationWeight = 10.0;
constexpr double kConfidencePenalty = 0.2;

// RMS of predicted z over ground-truth-valid pixels, floored away from zero;
// differentiable counterpart of sequence_scale on the ground truth.
template <typename T>
Tensor<T> sequence_scale_pred(const std::vector<FrameOutput<T>>& pred,
                              const std::vector<FrameTruth>& gt);

double sequence_scale_gt(const std::vector<FrameTruth>& gt);

// Mean over ordered pairs of rotation geodesic plus weighted l1 between
// scale-normalized relative translations.
template <typename T>
Tensor<T> loss_rel_cam(const std::vector<FrameOutput<T>>& pred,
                       const std::vector<FrameTruth>& gt,
                       const Tensor<T>& s_hat, double s_gt);

// Depth-weighted l1 between scale-normalized local points, averaged per
// frame over valid pixels, then over frames that have any.
template <typename T>
Tensor<T> loss_rel_point(const std::vector<FrameOutput<T>>& pred,
                         const std::vector<FrameTruth>& gt,
                         const Tensor<T>& s_hat, double s_gt);

// Confidence-weighted absolute-coordinate l1 minus the log-confidence bonus.
template <typename T>
Tensor<T> loss_abs_point(const std::vector<FrameOutput<T>>& pred,
                         const std::vector<FrameTruth>& gt);

// Mean (1 - cos) between predicted and ground-truth surface normals over
// pixels where both are defined. Fewer than 4 usable normals in the whole
// batch yields 0 with a warning.
template <typename T>
Tensor<T> loss_normal(const std::vector<FrameOutput<T>>& pred,
                      const std::vector<FrameTruth>& gt);

// Normal loss on a seeded pixel shuffle of the concatenated global maps,
// expressed in the first frame's camera (a pure convention: the term is
// invariant to the choice because only relative poses enter).
template <typename T>
Tensor<T> loss_shuffled_normal(const std::vector<FrameOutput<T>>& pred,
                               const std::vector<FrameTruth>& gt,
                               uint64_t perm_seed);

template <typename T>
Tensor<T> loss_shuffled_normal_with_perm(
    const std::vector<FrameOutput<T>>& pred,
    const std::vector<FrameTruth>& gt, const std::vector<int64_t>& perm);

std::vector<int64_t> shuffle_permutation(int64_t n, uint64_t seed);

template <typename T>
LossBreakdown<T> total_loss(const std::vector<FrameOutput<T>>& pred,
                            const std::vector<FrameTruth>& gt,
                            uint64_t perm_seed);

// Re-expresses every predicted pose in a different world frame (pose -> pose
// composed with w). Rigid-motion invariance tests feed the result back into
// the losses; predictions' point tensors are shared, pose tensors rebuilt.
template <typename T>
std::vector<FrameOutput<T>> transform_pred_poses(
    const std::vector<FrameOutput<T>>& pred, const CameraPose& w);

#define GART_EXTERN_LOSSES(T)                                                 \
  extern template Tensor<T> sequence_scale_pred<T>(                           \
      const std::vector<FrameOutput<T>>&, const std::vector<FrameTruth>&);    \
  extern template Tensor<T> loss_rel_cam<T>(                                  \
      const std::vector<FrameOutput<T>>&, const std::vector<FrameTruth>&,     \
      const Tensor<T>&, double);                                              \
  extern template Tensor<T> loss_rel_point<T>(                                \
      const std::vector<FrameOutput<T>>&, const std::vector<FrameTruth>&,     \
      const Tensor<T>&, double);                                              \
  extern template Tensor<T> loss_abs_point<T>(                                \
      const std::vector<FrameOutput<T>>&, const std::vector<FrameTruth>&);    \
  extern template Tensor<T> loss_normal<T>(                                   \
      const std::vector<FrameOutput<T>>&, const std::vector<FrameTruth>&);    \
  extern template Tensor<T> loss_shuffled_normal<T>(                          \
      const std::vector<FrameOutput<T>>&, const std::vector<FrameTruth>&,     \
      uint64_t);                                                              \
  extern template Tensor<T> loss_shuffled_normal_with_perm<T>(                \
      const std::vector<FrameOutput<T>>&, const std::vector<FrameTruth>&,     \
      const std::vector<int64_t>&);                                           \
  extern template LossBreakdown<T> total_loss<T>(                             \
      const std::vector<FrameOutput<T>>&, const std::vector<FrameTruth>&,     \
      uint64_t);                                                              \
  extern template std::vector<FrameOutput<T>> transform_pred_poses<T>(        \
      const std::vector<FrameOutput<T>>&, const CameraPose&);

GART_EXTERN_LOSSES(float)
GART_EXTERN_LOSSES(double)
#undef GART_EXTERN_LOSSES

}  // namespace gart
