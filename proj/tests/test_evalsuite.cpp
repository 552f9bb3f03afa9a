#include "gart/evalsuite.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <vector>

#include "gart/error.hpp"
#include "gart/geometry.hpp"
#include "gart/rng.hpp"
#include "gart/synthdata.hpp"

namespace fs = std::filesystem;

namespace gart {
namespace {

Mat3 rot_z(double a) {
  Mat3 m = Mat3::identity();
  m.at(0, 0) = std::cos(a);
  m.at(0, 1) = -std::sin(a);
  m.at(1, 0) = std::sin(a);
  m.at(1, 1) = std::cos(a);
  return m;
}

Mat3 rot_y(double a) {
  Mat3 m = Mat3::identity();
  m.at(0, 0) = std::cos(a);
  m.at(0, 2) = std::sin(a);
  m.at(2, 0) = -std::sin(a);
  m.at(2, 2) = std::cos(a);
  return m;
}

Sim3 inverse_sim3(const Sim3& g) {
  Sim3 inv;
  inv.scale = 1.0 / g.scale;
  inv.r = g.r.transposed();
  inv.t = (inv.r * g.t) * (-inv.scale);
  return inv;
}

std::vector<Vec3> random_cloud(Rng& rng, size_t n, double extent) {
  std::vector<Vec3> pts;
  for (size_t i = 0; i < n; ++i)
    pts.push_back({rng.uniform(-extent, extent), rng.uniform(-extent, extent),
                   rng.uniform(-extent, extent)});
  return pts;
}

double transform_residual(const Sim3& g, const std::vector<Vec3>& pred,
                          const std::vector<Vec3>& gt) {
  double sum = 0.0;
  for (size_t i = 0; i < pred.size(); ++i) {
    const Vec3 d = g.apply(pred[i]) - gt[i];
    sum += d.dot(d);
  }
  return sum;
}

DepthMap depth_from_values(int64_t h, int64_t w,
                           const std::vector<double>& values) {
  DepthMap d;
  d.init(h, w);
  for (size_t i = 0; i < values.size(); ++i) {
    d.depth[i] = values[i];
    d.valid[i] = values[i] > 0.0 ? 1 : 0;
  }
  return d;
}

CameraPose pose_with_center(const Mat3& r, const Vec3& center) {
  CameraPose p;
  p.r = r;
  p.t = -(r * center);
  return p;
}

TEST(AlignSim3, IdentityAndPureScale) {
  Rng rng(3);
  const std::vector<Vec3> gt = random_cloud(rng, 20, 2.0);

  const Sim3 id = align_sim3(gt, gt);
  EXPECT_NEAR(id.scale, 1.0, 1e-12);
  const Mat3 eye = Mat3::identity();
  for (int j = 0; j < 9; ++j) EXPECT_NEAR(id.r.m[j], eye.m[j], 1e-12);
  EXPECT_NEAR(id.t.norm(), 0.0, 1e-12);

  std::vector<Vec3> tripled;
  for (const Vec3& p : gt) tripled.push_back(p * 3.0);
  const Sim3 g = align_sim3(tripled, gt);
  EXPECT_NEAR(g.scale, 1.0 / 3.0, 1e-12);
  EXPECT_LT(std::sqrt(transform_residual(g, tripled, gt)), 1e-10);
}

TEST(AlignSim3, RecoversARandomSimilarity) {
  Rng rng(11);
  const std::vector<Vec3> pred = random_cloud(rng, 30, 1.5);

  Sim3 truth;
  truth.scale = 1.7;
  truth.r = rot_z(0.4) * rot_y(-0.9);
  truth.t = {0.3, -1.2, 2.0};
  std::vector<Vec3> gt;
  for (const Vec3& p : pred) gt.push_back(truth.apply(p));

  const Sim3 g = align_sim3(pred, gt);
  EXPECT_NEAR(g.scale, truth.scale, 1e-9);
  for (int j = 0; j < 9; ++j) EXPECT_NEAR(g.r.m[j], truth.r.m[j], 1e-9);
  EXPECT_NEAR((g.t - truth.t).norm(), 0.0, 1e-9);
  EXPECT_LT(transform_residual(g, pred, gt), 1e-18);
}

TEST(AlignSim3, NoNearbySimilarityBeatsTheFit) {
  // Noisy correspondences: the closed form must be a least-squares
  // minimum, so random perturbations of it can only raise the residual.
  Rng rng(17);
  const std::vector<Vec3> pred = random_cloud(rng, 40, 1.0);
  Sim3 truth;
  truth.scale = 0.6;
  truth.r = rot_y(1.1);
  truth.t = {-0.5, 0.8, 0.1};
  std::vector<Vec3> gt;
  for (const Vec3& p : pred) {
    Vec3 y = truth.apply(p);
    gt.push_back(y + Vec3{rng.uniform(-0.05, 0.05), rng.uniform(-0.05, 0.05),
                          rng.uniform(-0.05, 0.05)});
  }

  const Sim3 g = align_sim3(pred, gt);
  const double best = transform_residual(g, pred, gt);
  for (double eps : {1e-3, 1e-2, 1e-1}) {
    for (int trial = 0; trial < 100; ++trial) {
      Sim3 cand = g;
      cand.scale *= std::exp(rng.uniform(-eps, eps));
      cand.r = g.r * rot_z(rng.uniform(-eps, eps)) *
               rot_y(rng.uniform(-eps, eps));
      cand.t = g.t + Vec3{rng.uniform(-eps, eps), rng.uniform(-eps, eps),
                          rng.uniform(-eps, eps)};
      EXPECT_GE(transform_residual(cand, pred, gt), best - 1e-12);
    }
  }
}

TEST(AlignSim3, RejectsDegenerateConfigurations) {
  std::vector<Vec3> line;
  for (int i = 0; i < 10; ++i)
    line.push_back({(double)i, 2.0 * (double)i, -1.0 * (double)i});
  EXPECT_THROW(align_sim3(line, line), ContractError);

  const std::vector<Vec3> two{{0, 0, 0}, {1, 0, 0}};
  EXPECT_THROW(align_sim3(two, two), ContractError);

  const std::vector<Vec3> coincident(5, Vec3{1, 1, 1});
  std::vector<Vec3> spread;
  Rng rng(5);
  for (int i = 0; i < 5; ++i)
    spread.push_back({rng.uniform(), rng.uniform(), rng.uniform()});
  EXPECT_THROW(align_sim3(coincident, spread), ContractError);

  EXPECT_THROW(align_sim3(line, spread), ContractError);  // size mismatch
}

TEST(AlignMedian, HandCasesAndSharedMask) {
  const DepthMap pred3 = depth_from_values(1, 3, {1, 2, 3});
  const DepthMap gt3 = depth_from_values(1, 3, {2, 4, 6});
  EXPECT_DOUBLE_EQ(align_median(pred3, gt3), 2.0);

  const DepthMap pred2 = depth_from_values(1, 2, {1, 3});
  const DepthMap gt2 = depth_from_values(1, 2, {10, 30});
  EXPECT_DOUBLE_EQ(align_median(pred2, gt2), 10.0);

  // Only pixels valid in both maps participate.
  const DepthMap predm = depth_from_values(1, 4, {1, 0, 5, 8});
  const DepthMap gtm = depth_from_values(1, 4, {2, 7, 10, 0});
  EXPECT_DOUBLE_EQ(align_median(predm, gtm),
                   6.0 / 3.0);  // medians over {1,5} and {2,10}

  const DepthMap none = depth_from_values(1, 2, {0, 0});
  EXPECT_THROW(align_median(none, gt2), ContractError);
}

TEST(TrajectoryMetrics, PerfectAndConstantOffset) {
  std::vector<CameraPose> gt;
  for (int i = 0; i < 6; ++i)
    gt.push_back(pose_with_center(
        rot_z(0.2 * i),
        {std::cos(0.5 * i), std::sin(0.5 * i), 1.0 - 0.1 * i}));

  const TrajectoryMetrics perfect = trajectory_metrics(gt, gt, false);
  EXPECT_DOUBLE_EQ(perfect.ate, 0.0);
  EXPECT_DOUBLE_EQ(perfect.rpe_tra, 0.0);
  EXPECT_NEAR(perfect.rpe_rot, 0.0, 1e-6);

  const Vec3 offset{0.1, 0.0, 0.0};
  std::vector<CameraPose> shifted;
  for (const CameraPose& p : gt)
    shifted.push_back(pose_with_center(p.r, camera_center(p) + offset));

  const TrajectoryMetrics raw = trajectory_metrics(shifted, gt, false);
  EXPECT_NEAR(raw.ate, 0.1, 1e-12);
  EXPECT_NEAR(raw.rpe_tra, 0.0, 1e-12);
  EXPECT_NEAR(raw.rpe_rot, 0.0, 1e-6);

  const TrajectoryMetrics aligned = trajectory_metrics(shifted, gt, true);
  EXPECT_NEAR(aligned.ate, 0.0, 1e-9);
}

TEST(TrajectoryMetrics, HandComputedDriftAndRotation) {
  std::vector<CameraPose> gt, pred;
  for (int i = 0; i < 4; ++i) {
    gt.push_back(pose_with_center(Mat3::identity(), {(double)i, 0, 0}));
    pred.push_back(
        pose_with_center(Mat3::identity(), {(double)i, 0.1 * i, 0}));
  }
  const TrajectoryMetrics m = trajectory_metrics(pred, gt, false);
  EXPECT_NEAR(m.ate, std::sqrt((0.01 + 0.04 + 0.09) / 4.0), 1e-15);
  EXPECT_NEAR(m.rpe_tra, 0.1, 1e-15);
  EXPECT_NEAR(m.rpe_rot, 0.0, 1e-9);

  std::vector<CameraPose> gtr(2), predr(2);
  predr[1].r = rot_z(0.3);
  const TrajectoryMetrics rot = trajectory_metrics(predr, gtr, false);
  EXPECT_NEAR(rot.rpe_rot, 0.3 * 180.0 / std::numbers::pi_v<double>, 1e-10);
  EXPECT_DOUBLE_EQ(rot.rpe_tra, 0.0);

  EXPECT_THROW(trajectory_metrics(gt, predr, false), ContractError);
  EXPECT_THROW(
      trajectory_metrics(std::vector<CameraPose>(1),
                         std::vector<CameraPose>(1), false),
      ContractError);
}

TEST(DepthMetrics, HandCases) {
  const DepthMap gt = depth_from_values(1, 2, {2, 2});

  const DepthMetrics perfect = depth_metrics(gt, gt);
  EXPECT_DOUBLE_EQ(perfect.absrel, 0.0);
  EXPECT_DOUBLE_EQ(perfect.rmse, 0.0);
  EXPECT_DOUBLE_EQ(perfect.delta125, 1.0);

  const DepthMap doubled = depth_from_values(1, 2, {4, 4});
  const DepthMetrics twice = depth_metrics(doubled, gt);
  EXPECT_DOUBLE_EQ(twice.absrel, 1.0);
  EXPECT_DOUBLE_EQ(twice.delta125, 0.0);

  const DepthMap pred = depth_from_values(1, 2, {1, 2});
  const DepthMetrics m = depth_metrics(pred, gt);
  EXPECT_DOUBLE_EQ(m.absrel, 0.25);
  EXPECT_DOUBLE_EQ(m.rmse, std::sqrt(0.5));
  EXPECT_DOUBLE_EQ(m.delta125, 0.5);

  const DepthMap empty = depth_from_values(1, 2, {0, 0});
  EXPECT_THROW(depth_metrics(empty, gt), ContractError);
  const DepthMap wrong = depth_from_values(2, 2, {1, 1, 1, 1});
  EXPECT_THROW(depth_metrics(wrong, gt), ContractError);
}

TEST(NearestIndices, MatchesBruteForceOracleBothRegimes) {
  Rng rng(23);
  const std::vector<Vec3> small_from = random_cloud(rng, 100, 1.0);
  const std::vector<Vec3> small_to = random_cloud(rng, 100, 1.0);
  const std::vector<int64_t> got = nearest_indices(small_from, small_to);
  for (size_t i = 0; i < small_from.size(); ++i) {
    int64_t best = 0;
    double best_d = 1e300;
    for (size_t j = 0; j < small_to.size(); ++j) {
      const double d = (small_from[i] - small_to[j]).norm();
      if (d < best_d) {
        best_d = d;
        best = (int64_t)j;
      }
    }
    EXPECT_EQ(got[i], best);
  }

  // Above the exhaustive threshold the grid path must agree with brute
  // force on nearest distances.
  const std::vector<Vec3> big_to = random_cloud(rng, 12000, 3.0);
  const std::vector<Vec3> queries = random_cloud(rng, 600, 3.5);
  const std::vector<int64_t> grid_idx = nearest_indices(queries, big_to);
  for (size_t i = 0; i < queries.size(); ++i) {
    double best_d = 1e300;
    for (const Vec3& p : big_to)
      best_d = std::min(best_d, (queries[i] - p).norm());
    EXPECT_DOUBLE_EQ((queries[i] - big_to[(size_t)grid_idx[i]]).norm(),
                     best_d);
  }

  // Planar clouds stress the cell sizing.
  std::vector<Vec3> planar;
  for (int i = 0; i < 11000; ++i)
    planar.push_back({rng.uniform(-2, 2), rng.uniform(-2, 2), 0.0});
  const std::vector<Vec3> pq = random_cloud(rng, 300, 2.0);
  const std::vector<int64_t> pidx = nearest_indices(pq, planar);
  for (size_t i = 0; i < pq.size(); ++i) {
    double best_d = 1e300;
    for (const Vec3& p : planar)
      best_d = std::min(best_d, (pq[i] - p).norm());
    EXPECT_DOUBLE_EQ((pq[i] - planar[(size_t)pidx[i]]).norm(), best_d);
  }

  EXPECT_THROW(nearest_indices(small_from, {}), ContractError);
}

TEST(PointcloudMetrics, IdenticalCloudsAndOutlierAsymmetry) {
  Rng rng(31);
  std::vector<Vec3> gt = random_cloud(rng, 64, 1.0);
  gt.push_back({1.0, 0.5, 0.5});
  std::vector<Vec3> normals;
  for (size_t i = 0; i < gt.size(); ++i)
    normals.push_back(Vec3{0, 0, 1});

  const PointcloudMetrics same = pointcloud_metrics(gt, gt, normals, normals);
  EXPECT_DOUBLE_EQ(same.acc, 0.0);
  EXPECT_DOUBLE_EQ(same.comp, 0.0);
  ASSERT_TRUE(same.nc.has_value());
  EXPECT_DOUBLE_EQ(*same.nc, 1.0);

  // One outlier exactly 10 away from its nearest neighbor raises acc by
  // 10 / |pred| and cannot change comp.
  std::vector<Vec3> pred = gt;
  pred.push_back({11.0, 0.5, 0.5});
  const PointcloudMetrics out = pointcloud_metrics(pred, gt, {}, {});
  EXPECT_DOUBLE_EQ(out.acc, 10.0 / (double)pred.size());
  EXPECT_DOUBLE_EQ(out.comp, 0.0);
  EXPECT_FALSE(out.nc.has_value());

  EXPECT_THROW(pointcloud_metrics({}, gt, {}, {}), ContractError);
  EXPECT_THROW(pointcloud_metrics(gt, {}, {}, {}), ContractError);
  EXPECT_THROW(pointcloud_metrics(gt, gt, {Vec3{0, 0, 1}}, {}),
               ContractError);
}

TEST(PointcloudMetrics, OrderInvarianceAndNormalPairing) {
  Rng rng(37);
  const std::vector<Vec3> pred = random_cloud(rng, 50, 1.0);
  const std::vector<Vec3> gt = random_cloud(rng, 70, 1.0);
  const PointcloudMetrics base = pointcloud_metrics(pred, gt, {}, {});

  std::vector<Vec3> pred_shuffled = pred, gt_shuffled = gt;
  for (size_t i = pred_shuffled.size(); i > 1; --i)
    std::swap(pred_shuffled[i - 1], pred_shuffled[rng.randint(i)]);
  for (size_t i = gt_shuffled.size(); i > 1; --i)
    std::swap(gt_shuffled[i - 1], gt_shuffled[rng.randint(i)]);
  const PointcloudMetrics shuf =
      pointcloud_metrics(pred_shuffled, gt_shuffled, {}, {});
  EXPECT_NEAR(shuf.acc, base.acc, 1e-12);
  EXPECT_NEAR(shuf.comp, base.comp, 1e-12);

  // Orthogonal normals on identical clouds score zero; zero-norm entries
  // are skipped rather than polluting the mean.
  std::vector<Vec3> nx(pred.size(), Vec3{1, 0, 0});
  std::vector<Vec3> nz(pred.size(), Vec3{0, 0, 1});
  const PointcloudMetrics ortho = pointcloud_metrics(pred, pred, nx, nz);
  ASSERT_TRUE(ortho.nc.has_value());
  EXPECT_NEAR(*ortho.nc, 0.0, 1e-15);

  std::vector<Vec3> half = nx;
  for (size_t i = 0; i < half.size(); i += 2) half[i] = Vec3{0, 0, 0};
  const PointcloudMetrics skipped = pointcloud_metrics(pred, pred, half, nx);
  ASSERT_TRUE(skipped.nc.has_value());
  EXPECT_NEAR(*skipped.nc, 1.0, 1e-15);

  // Growing pred can only help comp and can hurt acc.
  std::vector<Vec3> grown = pred;
  grown.push_back({5.0, 5.0, 5.0});
  const PointcloudMetrics g = pointcloud_metrics(grown, gt, {}, {});
  EXPECT_LE(g.comp, base.comp);
  EXPECT_GT(g.acc, base.acc);
}

TEST(Evaluate, Sim3ModeUndoesAWorldSimilarity) {
  const SceneSequence scene = generate_scene(3, 5, 12, 12);

  Sim3 truth;
  truth.scale = 2.3;
  truth.r = rot_z(0.7) * rot_y(0.2);
  truth.t = {1.0, -0.4, 0.6};
  const Sim3 inv = inverse_sim3(truth);

  EvalInputs in;
  for (const SceneFrame& f : scene.frames) {
    in.gt_poses.push_back(f.pose);
    in.pred_poses.push_back(apply_sim3_world(f.pose, inv));
    in.gt_depths.push_back(f.depth);
    DepthMap pd = f.depth;
    for (double& z : pd.depth) z *= inv.scale;
    in.pred_depths.push_back(pd);

    const PointMap local = local_points_from_depth(f.depth, f.k);
    const PointMap world = global_from_local(local, f.pose);
    const NormalMap nrm = surface_normals(world);
    for (int64_t i = 0; i < world.h * world.w; ++i) {
      if (!world.valid[(size_t)i]) continue;
      in.gt_cloud.push_back(world.pts[(size_t)i]);
      in.pred_cloud.push_back(inv.apply(world.pts[(size_t)i]));
      const Vec3 n =
          nrm.valid[(size_t)i] ? nrm.pts[(size_t)i] : Vec3{0, 0, 0};
      in.gt_normals.push_back(n);
      in.pred_normals.push_back(inv.r * n);
    }
  }

  const EvalReport r = evaluate(in, AlignmentMode::kSim3);
  ASSERT_TRUE(r.ate && r.rpe_tra && r.rpe_rot);
  ASSERT_TRUE(r.absrel && r.rmse && r.delta125);
  ASSERT_TRUE(r.acc && r.comp && r.nc);
  EXPECT_LT(*r.ate, 1e-9);
  EXPECT_LT(*r.rpe_tra, 1e-9);
  EXPECT_LT(*r.rpe_rot, 1e-7);
  EXPECT_LT(*r.absrel, 1e-9);
  EXPECT_LT(*r.rmse, 1e-8);
  EXPECT_DOUBLE_EQ(*r.delta125, 1.0);
  EXPECT_LT(*r.acc, 1e-9);
  EXPECT_LT(*r.comp, 1e-9);
  EXPECT_NEAR(*r.nc, 1.0, 1e-9);

  // Without alignment the similarity shows up unshrunk.
  const EvalReport raw = evaluate(in, AlignmentMode::kNone);
  EXPECT_GT(*raw.ate, 0.1);
  EXPECT_GT(*raw.absrel, 0.1);
}

TEST(Evaluate, MedianModeFixesPureScaleAndIgnoresIt) {
  const SceneSequence scene = generate_scene(19, 4, 10, 10);
  EvalInputs in;
  const double k = 2.0;
  for (const SceneFrame& f : scene.frames) {
    in.gt_poses.push_back(f.pose);
    CameraPose scaled = f.pose;
    scaled.t = scaled.t * k;
    in.pred_poses.push_back(scaled);
    in.gt_depths.push_back(f.depth);
    DepthMap pd = f.depth;
    for (double& z : pd.depth) z *= k;
    in.pred_depths.push_back(pd);
  }

  const EvalReport r = evaluate(in, AlignmentMode::kMedian);
  EXPECT_LT(*r.ate, 1e-9);
  EXPECT_LT(*r.absrel, 1e-12);
  EXPECT_DOUBLE_EQ(*r.delta125, 1.0);

  // Median alignment makes depth metrics invariant to any global rescale.
  EvalInputs in5 = in;
  for (DepthMap& d : in5.pred_depths)
    for (double& z : d.depth) z *= 5.0;
  const EvalReport r5 = evaluate(in5, AlignmentMode::kMedian);
  EXPECT_NEAR(*r5.absrel, *r.absrel, 1e-12);
  EXPECT_NEAR(*r5.rmse, *r.rmse, 1e-12);
  EXPECT_DOUBLE_EQ(*r5.delta125, *r.delta125);

  const EvalReport none = evaluate(in, AlignmentMode::kNone);
  EXPECT_GT(*none.absrel, 0.5);
  EXPECT_EQ(none.alignment_mode, AlignmentMode::kNone);
}

TEST(Evaluate, Sim3FallsBackToPairedCloudsWithoutPoses) {
  Rng rng(41);
  EvalInputs in;
  in.gt_cloud = random_cloud(rng, 50, 1.0);
  Sim3 truth;
  truth.scale = 0.5;
  truth.r = rot_y(0.3);
  truth.t = {0, 1, 0};
  const Sim3 inv = inverse_sim3(truth);
  for (const Vec3& p : in.gt_cloud) in.pred_cloud.push_back(inv.apply(p));

  const EvalReport r = evaluate(in, AlignmentMode::kSim3);
  EXPECT_FALSE(r.ate.has_value());
  EXPECT_FALSE(r.absrel.has_value());
  ASSERT_TRUE(r.acc && r.comp);
  EXPECT_LT(*r.acc, 1e-9);
  EXPECT_LT(*r.comp, 1e-9);

  EvalInputs starved;
  starved.pred_cloud = {{0, 0, 0}};
  starved.gt_cloud = {{1, 0, 0}};
  EXPECT_THROW(evaluate(starved, AlignmentMode::kSim3), ContractError);
}

TEST(Reports, CsvAndTableSerialization) {
  EvalReport r;
  r.alignment_mode = AlignmentMode::kSim3;
  r.ate = 0.125;
  r.rpe_tra = 0.5;
  r.rpe_rot = 1.75;
  r.absrel = 0.03125;
  r.rmse = 0.25;
  r.delta125 = 0.875;

  const std::string csv = report_csv(r);
  EXPECT_EQ(csv,
            "alignment,ate,rpe_tra,rpe_rot,absrel,rmse,delta125,acc,comp,"
            "nc\nsim3,0.125,0.5,1.75,0.03125,0.25,0.875,,,\n");

  const std::string table = report_table(r);
  EXPECT_NE(table.find("alignment  sim3"), std::string::npos);
  EXPECT_NE(table.find("ate        0.125"), std::string::npos);
  EXPECT_NE(table.find("acc        n/a"), std::string::npos);

  EXPECT_EQ(parse_alignment_mode("median"), AlignmentMode::kMedian);
  EXPECT_EQ(to_string(AlignmentMode::kNone), "none");
  EXPECT_THROW(parse_alignment_mode("bogus"), ContractError);
}

TEST(Reports, SvgChartIsDeterministicAndWellFormed) {
  const fs::path path = fs::temp_directory_path() / "gart_chart_test.svg";
  const std::vector<ChartSeries> series{
      {"offline", {{1, 0.5}, {2, 0.25}, {4, 0.125}}},
      {"online", {{1, 0.5}, {2, 0.3}, {4, 0.2}}},
  };
  write_svg_line_chart(path.string(), "ate vs frames & caches", "frames",
                       "ate", series);
  std::ifstream f(path);
  std::stringstream ss;
  ss << f.rdbuf();
  const std::string svg = ss.str();
  EXPECT_EQ(svg.rfind("<svg", 0), 0u);
  size_t polylines = 0, pos = 0;
  while ((pos = svg.find("<polyline", pos)) != std::string::npos) {
    ++polylines;
    pos += 9;
  }
  EXPECT_EQ(polylines, series.size());
  EXPECT_NE(svg.find("ate vs frames &amp; caches"), std::string::npos);
  EXPECT_NE(svg.find("offline"), std::string::npos);

  write_svg_line_chart(path.string(), "ate vs frames & caches", "frames",
                       "ate", series);
  std::ifstream f2(path);
  std::stringstream ss2;
  ss2 << f2.rdbuf();
  EXPECT_EQ(ss2.str(), svg);

  EXPECT_THROW(
      write_svg_line_chart(path.string(), "t", "x", "y", {{"empty", {}}}),
      ContractError);
  fs::remove(path);
}

}  // namespace
}  // namespace gart
