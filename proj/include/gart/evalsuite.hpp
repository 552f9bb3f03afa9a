#pragma once

// Trajectory, depth, and point-cloud quality metrics, with the scale
// alignments that make them comparable across arbitrarily scaled
// reconstructions: closed-form Sim(3) fitting for trajectories and clouds,
// median-ratio scaling for depth. Reports serialize to CSV, an aligned text
// table, and an SVG line chart.

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "gart/geometry.hpp"

namespace gart {

enum class AlignmentMode { kSim3, kMedian, kNone };

std::string to_string(AlignmentMode mode);
AlignmentMode parse_alignment_mode(const std::string& name);

// Similarity transform x -> scale * (r * x) + t.
struct Sim3 {
  double scale = 1.0;
  Mat3 r = Mat3::identity();
  Vec3 t{0, 0, 0};

  Vec3 apply(const Vec3& x) const { return (r * x) * scale + t; }
};

// Least-squares similarity mapping pred onto gt (closed form: centroid
// removal, covariance SVD, scale from the correlated-variance ratio).
// Throws ContractError for fewer than 3 points or a collinear/degenerate
// configuration.
Sim3 align_sim3(const std::vector<Vec3>& pred, const std::vector<Vec3>& gt);

// median(gt) / median(pred) over pixels valid in both maps. Throws
// ContractError when the shared mask is empty or the predicted median is
// not positive.
double align_median(const std::vector<DepthMap>& pred,
                    const std::vector<DepthMap>& gt);
double align_median(const DepthMap& pred, const DepthMap& gt);

// Re-expresses a world-to-camera pose after remapping the world by g: the
// camera center moves to g(center), camera-frame coordinates scale by
// g.scale, and the rotation becomes r * g.r^T.
CameraPose apply_sim3_world(const CameraPose& pose, const Sim3& g);

struct TrajectoryMetrics {
  double ate = 0.0;      // RMSE of camera-center residuals
  double rpe_tra = 0.0;  // mean consecutive relative-translation error
  double rpe_rot = 0.0;  // mean consecutive relative-rotation error, degrees
};

// Consecutive-pair relative errors plus absolute RMSE. With sim3_align the
// predictions are first mapped onto gt by align_sim3 of the camera centers
// (requiring >= 3 poses); otherwise both trajectories are compared as given.
TrajectoryMetrics trajectory_metrics(const std::vector<CameraPose>& pred,
                                     const std::vector<CameraPose>& gt,
                                     bool sim3_align);

struct DepthMetrics {
  double absrel = 0.0;    // mean |p - g| / g
  double rmse = 0.0;      // sqrt of mean squared error
  double delta125 = 0.0;  // fraction with max(p/g, g/p) < 1.25
};

// Pooled over every pixel valid in both maps of each pair. Throws
// ContractError on shape mismatch, an empty shared mask, or non-positive
// ground-truth depth inside the mask.
DepthMetrics depth_metrics(const std::vector<DepthMap>& pred,
                           const std::vector<DepthMap>& gt);
DepthMetrics depth_metrics(const DepthMap& pred, const DepthMap& gt);

// Index into `to` of each query's nearest neighbor. Exhaustive scan for
// small targets, uniform grid hashing above 10^4 points; both give exact
// nearest neighbors.
std::vector<int64_t> nearest_indices(const std::vector<Vec3>& from,
                                     const std::vector<Vec3>& to);

struct PointcloudMetrics {
  double acc = 0.0;   // mean over pred of nearest-gt distance
  double comp = 0.0;  // mean over gt of nearest-pred distance
  // Mean absolute cosine between nearest-neighbor-paired normals, averaged
  // over both matching directions. Unset when no usable pair exists.
  std::optional<double> nc;
};

// Normal vectors ride along with their cloud: pass vectors of equal length
// (or empty to skip normal consistency); entries with near-zero norm are
// ignored.
PointcloudMetrics pointcloud_metrics(const std::vector<Vec3>& pred_pts,
                                     const std::vector<Vec3>& gt_pts,
                                     const std::vector<Vec3>& pred_normals,
                                     const std::vector<Vec3>& gt_normals);

struct EvalReport {
  std::optional<double> ate, rpe_tra, rpe_rot;
  std::optional<double> absrel, rmse, delta125;
  std::optional<double> acc, comp, nc;
  AlignmentMode alignment_mode = AlignmentMode::kNone;
};

struct EvalInputs {
  std::vector<CameraPose> pred_poses, gt_poses;
  std::vector<DepthMap> pred_depths, gt_depths;
  std::vector<Vec3> pred_cloud, gt_cloud;
  std::vector<Vec3> pred_normals, gt_normals;  // empty or cloud-sized
};

// Applies one shared alignment to all predictions, then fills whichever
// metric groups have inputs. kSim3 fits the similarity on camera centers
// (falling back to the paired clouds when fewer than 3 poses exist); kMedian
// rescales everything by the depth median ratio; kNone evaluates raw
// predictions untouched.
EvalReport evaluate(const EvalInputs& in, AlignmentMode mode);

std::string report_csv(const EvalReport& r);
std::string report_table(const EvalReport& r);

struct ChartSeries {
  std::string name;
  std::vector<std::pair<double, double>> pts;
};

// Self-contained SVG line chart, deterministic byte-for-byte for equal
// inputs. Throws ContractError when no series has a point.
void write_svg_line_chart(const std::string& path, const std::string& title,
                          const std::string& x_label,
                          const std::string& y_label,
                          const std::vector<ChartSeries>& series);

}  // namespace gart
