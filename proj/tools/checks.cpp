#include "checks.hpp"

#include "cli_util.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <vector>

#include "gart/attention.hpp"
#include "gart/geometry.hpp"
#include "gart/losses.hpp"
#include "gart/model.hpp"
#include "gart/rng.hpp"
#include "gart/synthdata.hpp"
#include "gart/tensor.hpp"
#include "gart/trainer.hpp"

namespace gart::cli {

namespace {

struct CheckLine {
  std::string name;
  double measured = 0.0;
  double tol = 0.0;
  bool pass = false;
};

void print_line(std::ostream& os, const CheckLine& c) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "[%s] %-24s measured=%-12.4g tol=%.4g\n",
                c.pass ? "PASS" : "FAIL", c.name.c_str(), c.measured, c.tol);
  os << buf;
}

ModelConfig check_model_config() {
  ModelConfig c;
  c.layers = 2;
  c.dim = 32;
  c.heads = 4;
  c.patch = 8;
  c.image_h = 8;
  c.image_w = 8;
  c.max_group = 8;
  c.init_seed = 5;
  return c;
}

std::vector<FrameBundle> image_only_bundles(const SceneSequence& scene) {
  std::vector<FrameBundle> out;
  for (size_t i = 0; i < scene.frames.size(); ++i) {
    FrameModalities none;
    out.push_back(frame_bundle_from_scene(scene.frames[i], (int64_t)i, none,
                                          /*sparsify_seed=*/0));
  }
  return out;
}

// Exhaustive frame-pair rule up to n = 8: key j visible from query i iff
// j's group index does not exceed i's.
CheckLine check_mask_oracle(const std::string& fault) {
  CheckLine c{"mask_pair_oracle", 0.0, 0.0, false};
  int64_t mismatches = 0;
  for (int64_t n = 1; n <= 8; ++n) {
    for (int64_t g = 1; g <= n; ++g) {
      std::vector<uint8_t> mask = build_group_causal_mask(n, g);
      if (fault == "mask") mask[(size_t)(n - 1)] ^= 1;  // corrupt row 0
      for (int64_t i = 0; i < n; ++i)
        for (int64_t j = 0; j < n; ++j) {
          const uint8_t want = (j / g) <= (i / g) ? 1 : 0;
          mismatches += mask[(size_t)(i * n + j)] != want;
        }
    }
  }
  c.measured = (double)mismatches;
  c.pass = mismatches == 0;
  return c;
}

double max_abs_diff(const Tensor64& a, const Tensor64& b) {
  double m = 0.0;
  for (int64_t i = 0; i < a.numel(); ++i)
    m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
  return m;
}

double max_frame_diff(const std::vector<FrameOutput<double>>& a,
                      const std::vector<FrameOutput<double>>& b) {
  double m = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    m = std::max(m, max_abs_diff(a[i].points, b[i].points));
    m = std::max(m, max_abs_diff(a[i].confidence, b[i].confidence));
    m = std::max(m, max_abs_diff(a[i].rotation, b[i].rotation));
    m = std::max(m, max_abs_diff(a[i].translation, b[i].translation));
  }
  return m;
}

// Offline masking, unbounded streaming, and a full-length prefill are three
// routes to the same computation.
CheckLine check_cache_equivalence(const Model<double>& model,
                                  const std::vector<FrameBundle>& frames) {
  CheckLine c{"cache_mode_equivalence", 0.0, 1e-10, false};
  const int64_t n = (int64_t)frames.size();
  double m = 0.0;
  for (int64_t g : {int64_t(1), int64_t(2), int64_t(3)}) {
    const auto offline = model.forward_offline(frames, g);
    const auto online = model.forward_online(frames, g, /*queue=*/0,
                                             EvictPolicy::kFifo, 0);
    m = std::max(m, max_frame_diff(offline.frames, online.frames));
  }
  const auto one_group = model.forward_offline(frames, n);
  const auto hybrid = model.forward_hybrid(frames, n, /*queue=*/0,
                                           EvictPolicy::kFifo, 0);
  m = std::max(m, max_frame_diff(one_group.frames, hybrid.frames));
  c.measured = m;
  c.pass = m <= c.tol;
  return c;
}

CheckLine check_bounded_cache(const Model<double>& model,
                              const std::vector<FrameBundle>& frames) {
  const int64_t q = 3;
  CheckLine c{"bounded_cache_frames", 0.0, (double)q, false};
  const auto out =
      model.forward_online(frames, 1, q, EvictPolicy::kFifo, 0);
  int64_t peak = 0;
  for (const StepStats& s : out.steps) peak = std::max(peak, s.cached_frames);
  c.measured = (double)peak;
  c.pass = peak <= q;
  return c;
}

CheckLine check_so3_projection() {
  CheckLine c{"so3_projection", 0.0, 1e-9, false};
  Rng rng(17);
  double worst = 0.0;
  for (int t = 0; t < 1000; ++t) {
    Mat3 m;
    for (int i = 0; i < 9; ++i) m.m[i] = rng.uniform(-1.0, 1.0);
    const Mat3 r = orthogonalize(m);
    const Mat3 rtr = r.transposed() * r;
    double defect = std::abs(r.det() - 1.0);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        defect = std::max(defect,
                          std::abs(rtr.at(i, j) - (i == j ? 1.0 : 0.0)));
    // Projecting a rotation must return it unchanged.
    const Mat3 again = orthogonalize(r);
    for (int i = 0; i < 9; ++i)
      defect = std::max(defect, std::abs(again.m[i] - r.m[i]));
    worst = std::max(worst, defect);
  }
  c.measured = worst;
  c.pass = worst <= c.tol;
  return c;
}

// Left-composing one rigid motion onto every predicted pose must leave all
// relative poses and anchor-expressed global maps untouched.
CheckLine check_anchor_freedom(const Model<double>& model,
                               const std::vector<FrameBundle>& frames) {
  CheckLine c{"anchor_freedom", 0.0, 1e-9, false};
  const ModelOutput<double> out = model.forward_offline(frames, 2);

  Mat3 seed;
  const double vals[9] = {0.2, -0.9, 0.4, 0.8, 0.1, -0.5, 0.3, 0.6, 0.7};
  for (int i = 0; i < 9; ++i) seed.m[i] = vals[i];
  CameraPose w;
  w.r = orthogonalize(seed);
  w.t = Vec3{0.3, -0.2, 0.5};

  ModelOutput<double> moved;
  moved.frames = transform_pred_poses(out.frames, w);

  double worst = 0.0;
  const size_t n = out.frames.size();
  for (size_t i = 0; i < n; ++i)
    for (size_t j = 0; j < n; ++j) {
      const CameraPose a =
          relative_pose(out.frames[i].pose(), out.frames[j].pose());
      const CameraPose b =
          relative_pose(moved.frames[i].pose(), moved.frames[j].pose());
      for (int e = 0; e < 9; ++e)
        worst = std::max(worst, std::abs(a.r.m[e] - b.r.m[e]));
      worst = std::max(worst, (a.t - b.t).norm());
    }

  const auto maps_a = global_points(out, frames, 0);
  const auto maps_b = global_points(moved, frames, 0);
  for (size_t f = 0; f < maps_a.size(); ++f)
    for (size_t p = 0; p < maps_a[f].pts.size(); ++p)
      worst = std::max(worst, (maps_a[f].pts[p] - maps_b[f].pts[p]).norm());

  c.measured = worst;
  c.pass = worst <= c.tol;
  return c;
}

std::vector<FrameBundle> full_modal_bundles(const SceneSequence& scene) {
  std::vector<FrameBundle> out;
  for (size_t i = 0; i < scene.frames.size(); ++i) {
    FrameModalities mods;
    mods.has_depth = true;
    mods.has_intrinsics = true;
    mods.has_pose = true;
    mods.pattern.kind = DepthPattern::kGrid;
    mods.pattern.stride = 2;
    out.push_back(
        frame_bundle_from_scene(scene.frames[i], (int64_t)i, mods, 0));
  }
  return out;
}

CheckLine check_grad_end_to_end(Model<double>& model,
                                const std::vector<FrameBundle>& frames,
                                const std::vector<FrameTruth>& gt) {
  CheckLine c{"grad_end_to_end", 0.0, 1e-3, false};
  const auto loss_value = [&]() {
    return total_loss(model.forward_offline(frames, 2).frames, gt, 7)
        .total.item();
  };

  auto params = model.parameter_list();
  for (Tensor64* p : params) p->zero_grad();
  backward(total_loss(model.forward_offline(frames, 2).frames, gt, 7).total);

  double worst = 0.0;
  for (int k = 0; k < 8; ++k) {
    Tensor64* p = params[(size_t)((k * 37 + 1) % (int)params.size())];
    const int64_t coord = (k * 101) % p->numel();
    const double ad = p->has_grad() ? p->grad()[(size_t)coord] : 0.0;
    const double x0 = p->data()[coord];
    const double h = 1e-5 * std::max(1.0, std::abs(x0));
    p->mutable_data()[coord] = x0 + h;
    const double fp = loss_value();
    p->mutable_data()[coord] = x0 - h;
    const double fm = loss_value();
    p->mutable_data()[coord] = x0;
    const double fd = (fp - fm) / (2.0 * h);
    worst = std::max(worst, std::abs(ad - fd) / std::max(1.0, std::abs(fd)));
  }
  c.measured = worst;
  c.pass = worst <= c.tol;
  return c;
}

// GT re-expressed as a prediction, uniformly scaled by k, confidence 1.
std::vector<FrameOutput<double>> pred_from_truth(
    const std::vector<FrameTruth>& gt, double k) {
  std::vector<FrameOutput<double>> out;
  for (size_t f = 0; f < gt.size(); ++f) {
    const PointMap& m = gt[f].local;
    const int64_t hw = m.h * m.w;
    std::vector<double> xyz((size_t)(hw * 3));
    for (int64_t j = 0; j < hw; ++j) {
      xyz[(size_t)(j * 3 + 0)] = k * m.pts[(size_t)j].x;
      xyz[(size_t)(j * 3 + 1)] = k * m.pts[(size_t)j].y;
      xyz[(size_t)(j * 3 + 2)] = k * m.pts[(size_t)j].z;
    }
    std::vector<double> rot(9);
    for (int i = 0; i < 9; ++i) rot[(size_t)i] = gt[f].pose.r.m[(size_t)i];
    FrameOutput<double> p;
    p.frame_id = (int64_t)f;
    p.points = Tensor64::from_data({hw, 3}, std::move(xyz));
    p.confidence = Tensor64::full({hw, 1}, 1.0);
    p.rotation = Tensor64::from_data({3, 3}, rot);
    p.raw_rotation = p.rotation;
    p.translation = Tensor64::from_data(
        {3}, {k * gt[f].pose.t.x, k * gt[f].pose.t.y, k * gt[f].pose.t.z});
    out.push_back(std::move(p));
  }
  return out;
}

// Hand-built truth whose rotations are exact signed permutations, so the
// pairwise rotation products and traces carry no rounding at all. Combined
// with power-of-two scale factors the scale-normalized losses are bit-exact
// zeros, which is what makes a 1e-10 bound on them honest.
std::vector<FrameTruth> exact_truth(int64_t n_frames, int64_t h, int64_t w) {
  const double r_z90[9] = {0, -1, 0, 1, 0, 0, 0, 0, 1};   // 90 deg about z
  const double r_x90[9] = {1, 0, 0, 0, 0, -1, 0, 1, 0};   // 90 deg about x
  std::vector<FrameTruth> out;
  Rng rng(29);
  for (int64_t f = 0; f < n_frames; ++f) {
    FrameTruth t;
    t.pose.r = Mat3::identity();
    if (f % 3 == 1)
      for (int i = 0; i < 9; ++i) t.pose.r.m[i] = r_z90[i];
    if (f % 3 == 2)
      for (int i = 0; i < 9; ++i) t.pose.r.m[i] = r_x90[i];
    t.pose.t = Vec3{0.5 * (double)f, -0.25, 2.0 + 0.5 * (double)f};
    t.local.init(h, w);
    t.depth.assign((size_t)(h * w), 0.0);
    for (int64_t v = 0; v < h; ++v)
      for (int64_t u = 0; u < w; ++u) {
        const size_t j = (size_t)(v * w + u);
        const double z = 1.5 + rng.uniform(0.0, 1.0);
        t.local.pts[j] = Vec3{0.2 * (double)u - 0.3, 0.2 * (double)v, z};
        t.local.valid[j] = 1;
        t.depth[j] = z;
      }
    out.push_back(std::move(t));
  }
  return out;
}

// Predictions equal to GT scaled by k: the scale-normalized terms stay at
// zero for every k, the metric term vanishes only at k = 1.
void check_scale(const std::vector<FrameTruth>& gt, CheckLine* invariance,
                 CheckLine* sensitivity) {
  *invariance = {"scale_rel_invariance", 0.0, 1e-10, false};
  *sensitivity = {"scale_abs_minimum", 0.0, 0.0, false};

  const double abs_at_one =
      total_loss(pred_from_truth(gt, 1.0), gt, 7).abs_point.item();
  double drift = 0.0;
  double min_abs = 1e300;
  for (double k : {0.25, 0.5, 2.0, 4.0}) {
    const LossBreakdown<double> s = total_loss(pred_from_truth(gt, k), gt, 7);
    drift = std::max(drift, std::abs(s.rel_cam.item()));
    drift = std::max(drift, std::abs(s.rel_point.item()));
    min_abs = std::min(min_abs, s.abs_point.item());
  }
  invariance->measured = drift;
  invariance->pass = drift <= invariance->tol;
  sensitivity->measured = min_abs;
  sensitivity->pass = min_abs > 0.0 && abs_at_one < min_abs;
}

}  // namespace

int run_checks(const std::string& fault, std::ostream& os) {
  if (!fault.empty() && fault != "mask")
    throw UsageError("unknown --inject-fault: " + fault);

  std::vector<CheckLine> lines;
  lines.push_back(check_mask_oracle(fault));

  const Model<double> model(check_model_config());
  const SceneSequence scene = generate_scene(11, 6, 8, 8);
  const std::vector<FrameBundle> plain = image_only_bundles(scene);

  lines.push_back(check_cache_equivalence(model, plain));
  lines.push_back(check_bounded_cache(model, plain));
  lines.push_back(check_so3_projection());
  lines.push_back(check_anchor_freedom(model, plain));

  const SceneSequence grad_scene = generate_scene(13, 2, 8, 8);
  const std::vector<FrameBundle> modal = full_modal_bundles(grad_scene);
  std::vector<FrameTruth> gt;
  for (const SceneFrame& f : grad_scene.frames)
    gt.push_back(frame_truth_from_scene(f));
  Model<double> grad_model(check_model_config());
  lines.push_back(check_grad_end_to_end(grad_model, modal, gt));

  CheckLine invariance, sensitivity;
  check_scale(exact_truth(3, 4, 4), &invariance, &sensitivity);
  lines.push_back(invariance);
  lines.push_back(sensitivity);

  int failures = 0;
  for (const CheckLine& c : lines) {
    print_line(os, c);
    failures += !c.pass;
  }
  os << "check: " << (lines.size() - (size_t)failures) << "/" << lines.size()
     << " passed\n";
  return failures;
}

}  // namespace gart::cli
