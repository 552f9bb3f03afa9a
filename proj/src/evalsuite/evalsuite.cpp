#include "gart/evalsuite.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>
#include <unordered_map>

#include "gart/error.hpp"

namespace gart {

std::string to_string(AlignmentMode mode) {
  switch (mode) {
    case AlignmentMode::kSim3:
      return "sim3";
    case AlignmentMode::kMedian:
      return "median";
    default:
      return "none";
  }
}

AlignmentMode parse_alignment_mode(const std::string& name) {
  if (name == "sim3") return AlignmentMode::kSim3;
  if (name == "median") return AlignmentMode::kMedian;
  if (name == "none") return AlignmentMode::kNone;
  throw ContractError("unknown alignment mode: " + name +
                      " (expected sim3, median, or none)");
}

Sim3 align_sim3(const std::vector<Vec3>& pred, const std::vector<Vec3>& gt) {
  contract_check(pred.size() == gt.size(),
                 "align_sim3: point counts differ");
  const size_t n = pred.size();
  contract_check(n >= 3, "align_sim3: need at least 3 points");

  Vec3 mp{0, 0, 0}, mg{0, 0, 0};
  for (size_t i = 0; i < n; ++i) {
    mp = mp + pred[i];
    mg = mg + gt[i];
  }
  mp = mp * (1.0 / (double)n);
  mg = mg * (1.0 / (double)n);

  // Covariance of centered gt against centered pred, and pred variance.
  Mat3 cov{};
  for (int j = 0; j < 9; ++j) cov.m[j] = 0.0;
  double var_p = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const Vec3 dp = pred[i] - mp;
    const Vec3 dg = gt[i] - mg;
    const double dpv[3] = {dp.x, dp.y, dp.z};
    const double dgv[3] = {dg.x, dg.y, dg.z};
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) cov.at(r, c) += dgv[r] * dpv[c];
    var_p += dp.dot(dp);
  }
  const double inv_n = 1.0 / (double)n;
  for (int j = 0; j < 9; ++j) cov.m[j] *= inv_n;
  var_p *= inv_n;
  contract_check(var_p >= 1e-18,
                 "align_sim3: degenerate prediction (all points coincide)");

  // Signed SVD: u, v are proper rotations and sigma.z carries the sign of
  // det(cov), so u v^T is the optimal rotation and the signed trace is the
  // correlated variance. Collinear inputs are rejected inside the SVD.
  const Svd3 s = svd3(cov);
  Sim3 g;
  g.r = s.u * s.v.transposed();
  g.scale = (s.sigma.x + s.sigma.y + s.sigma.z) / var_p;
  contract_check(g.scale > 0.0, "align_sim3: non-positive fitted scale");
  g.t = mg - (g.r * mp) * g.scale;
  return g;
}

namespace {

double median_of(std::vector<double>& v) {
  const size_t n = v.size();
  const size_t mid = n / 2;
  std::nth_element(v.begin(), v.begin() + (ptrdiff_t)mid, v.end());
  const double hi = v[mid];
  if (n % 2 == 1) return hi;
  std::nth_element(v.begin(), v.begin() + (ptrdiff_t)(mid - 1),
                   v.begin() + (ptrdiff_t)mid);
  return 0.5 * (v[mid - 1] + hi);
}

void shared_valid_values(const DepthMap& pred, const DepthMap& gt,
                         std::vector<double>& pv, std::vector<double>& gv) {
  contract_check(pred.h == gt.h && pred.w == gt.w,
                 "depth maps have mismatched shapes");
  for (int64_t i = 0; i < pred.h * pred.w; ++i)
    if (pred.valid[(size_t)i] && gt.valid[(size_t)i]) {
      pv.push_back(pred.depth[(size_t)i]);
      gv.push_back(gt.depth[(size_t)i]);
    }
}

}  // namespace

double align_median(const std::vector<DepthMap>& pred,
                    const std::vector<DepthMap>& gt) {
  contract_check(pred.size() == gt.size(),
                 "align_median: sequence lengths differ");
  std::vector<double> pv, gv;
  for (size_t i = 0; i < pred.size(); ++i)
    shared_valid_values(pred[i], gt[i], pv, gv);
  contract_check(!pv.empty(), "align_median: empty shared validity mask");
  const double mp = median_of(pv);
  contract_check(mp > 0.0, "align_median: non-positive predicted median");
  return median_of(gv) / mp;
}

double align_median(const DepthMap& pred, const DepthMap& gt) {
  return align_median(std::vector<DepthMap>{pred},
                      std::vector<DepthMap>{gt});
}

CameraPose apply_sim3_world(const CameraPose& pose, const Sim3& g) {
  // With the world remapped by X' = s Q X + q, the camera that saw
  // X_c = R X + T now sees X_c' = s X_c, reached by R' = R Q^T and
  // T' = s T - R' q.
  CameraPose out;
  out.r = pose.r * g.r.transposed();
  out.t = pose.t * g.scale - out.r * g.t;
  return out;
}

TrajectoryMetrics trajectory_metrics(const std::vector<CameraPose>& pred,
                                     const std::vector<CameraPose>& gt,
                                     bool sim3_align) {
  contract_check(pred.size() == gt.size(),
                 "trajectory_metrics: trajectory lengths differ");
  const size_t n = pred.size();
  contract_check(n >= 2, "trajectory_metrics: need at least 2 poses");

  std::vector<CameraPose> p = pred;
  if (sim3_align) {
    std::vector<Vec3> cp, cg;
    for (size_t i = 0; i < n; ++i) {
      cp.push_back(camera_center(pred[i]));
      cg.push_back(camera_center(gt[i]));
    }
    const Sim3 g = align_sim3(cp, cg);
    for (CameraPose& pose : p) pose = apply_sim3_world(pose, g);
  }

  TrajectoryMetrics m;
  for (size_t i = 0; i < n; ++i) {
    const Vec3 d = camera_center(p[i]) - camera_center(gt[i]);
    m.ate += d.dot(d);
  }
  m.ate = std::sqrt(m.ate / (double)n);

  for (size_t i = 0; i + 1 < n; ++i) {
    const CameraPose rel_p = relative_pose(p[i + 1], p[i]);
    const CameraPose rel_g = relative_pose(gt[i + 1], gt[i]);
    const CameraPose e = compose(inverse(rel_g), rel_p);
    m.rpe_tra += e.t.norm();
    m.rpe_rot += geodesic_rot_distance(e.r, Mat3::identity()) * 180.0 /
                 std::numbers::pi_v<double>;
  }
  m.rpe_tra /= (double)(n - 1);
  m.rpe_rot /= (double)(n - 1);
  return m;
}

DepthMetrics depth_metrics(const std::vector<DepthMap>& pred,
                           const std::vector<DepthMap>& gt) {
  contract_check(pred.size() == gt.size(),
                 "depth_metrics: sequence lengths differ");
  std::vector<double> pv, gv;
  for (size_t i = 0; i < pred.size(); ++i)
    shared_valid_values(pred[i], gt[i], pv, gv);
  contract_check(!pv.empty(), "depth_metrics: empty shared validity mask");

  DepthMetrics m;
  for (size_t i = 0; i < pv.size(); ++i) {
    const double p = pv[i], g = gv[i];
    contract_check(g > 0.0, "depth_metrics: non-positive ground-truth depth");
    m.absrel += std::abs(p - g) / g;
    m.rmse += (p - g) * (p - g);
    if (p > 0.0 && std::max(p / g, g / p) < 1.25) m.delta125 += 1.0;
  }
  const double inv = 1.0 / (double)pv.size();
  m.absrel *= inv;
  m.rmse = std::sqrt(m.rmse * inv);
  m.delta125 *= inv;
  return m;
}

DepthMetrics depth_metrics(const DepthMap& pred, const DepthMap& gt) {
  return depth_metrics(std::vector<DepthMap>{pred},
                       std::vector<DepthMap>{gt});
}

namespace {

constexpr size_t kExhaustiveLimit = 10000;

int64_t nearest_exhaustive(const Vec3& q, const std::vector<Vec3>& to) {
  int64_t best = 0;
  double best_d2 = 1e300;
  for (size_t j = 0; j < to.size(); ++j) {
    const Vec3 d = q - to[j];
    const double d2 = d.dot(d);
    if (d2 < best_d2) {
      best_d2 = d2;
      best = (int64_t)j;
    }
  }
  return best;
}

// Uniform hash grid over the target cloud. Hash collisions only add extra
// distance candidates, never hide a point, so exactness is preserved; the
// ring bound below guarantees no nearer point remains unscanned.
struct HashGrid {
  const std::vector<Vec3>& pts;
  double cell;
  Vec3 lo;
  int64_t hi_cell[3];
  std::unordered_map<uint64_t, std::vector<int32_t>> buckets;

  static uint64_t key(int64_t x, int64_t y, int64_t z) {
    return (uint64_t)x * 73856093ull ^ (uint64_t)y * 19349663ull ^
           (uint64_t)z * 83492791ull;
  }

  explicit HashGrid(const std::vector<Vec3>& target) : pts(target) {
    Vec3 hi = pts[0];
    lo = pts[0];
    for (const Vec3& p : pts) {
      lo = {std::min(lo.x, p.x), std::min(lo.y, p.y), std::min(lo.z, p.z)};
      hi = {std::max(hi.x, p.x), std::max(hi.y, p.y), std::max(hi.z, p.z)};
    }
    const double diag = (hi - lo).norm();
    cell = std::max(diag / std::cbrt((double)pts.size()), 1e-12);
    for (int a = 0; a < 3; ++a) {
      const double extent = (a == 0 ? hi.x - lo.x : a == 1 ? hi.y - lo.y
                                                           : hi.z - lo.z);
      hi_cell[a] = (int64_t)std::floor(extent / cell);
    }
    buckets.reserve(pts.size());
    for (size_t j = 0; j < pts.size(); ++j) {
      int64_t c[3];
      coords(pts[j], c);
      buckets[key(c[0], c[1], c[2])].push_back((int32_t)j);
    }
  }

  void coords(const Vec3& p, int64_t c[3]) const {
    c[0] = (int64_t)std::floor((p.x - lo.x) / cell);
    c[1] = (int64_t)std::floor((p.y - lo.y) / cell);
    c[2] = (int64_t)std::floor((p.z - lo.z) / cell);
  }

  void scan_cell(const Vec3& q, int64_t x, int64_t y, int64_t z,
                 double& best_d2, int64_t& best) const {
    const auto it = buckets.find(key(x, y, z));
    if (it == buckets.end()) return;
    for (int32_t j : it->second) {
      const Vec3 d = q - pts[(size_t)j];
      const double d2 = d.dot(d);
      if (d2 < best_d2) {
        best_d2 = d2;
        best = j;
      }
    }
  }

  int64_t nearest(const Vec3& q) const {
    int64_t qc[3];
    coords(q, qc);
    int64_t best = -1;
    double best_d2 = 1e300;
    // After scanning Chebyshev ring r, any unscanned point differs by at
    // least r cells on some axis and so lies at distance >= r * cell.
    int64_t r_max = 0;
    for (int a = 0; a < 3; ++a)
      r_max = std::max(r_max, std::max(qc[a], hi_cell[a] - qc[a]));
    for (int64_t r = 0; r <= r_max; ++r) {
      const int64_t x0 = qc[0] - r, x1 = qc[0] + r;
      const int64_t y0 = qc[1] - r, y1 = qc[1] + r;
      const int64_t z0 = qc[2] - r, z1 = qc[2] + r;
      if (r == 0) {
        scan_cell(q, qc[0], qc[1], qc[2], best_d2, best);
      } else {
        for (int64_t y = y0; y <= y1; ++y)
          for (int64_t z = z0; z <= z1; ++z) {
            scan_cell(q, x0, y, z, best_d2, best);
            scan_cell(q, x1, y, z, best_d2, best);
          }
        for (int64_t x = x0 + 1; x <= x1 - 1; ++x)
          for (int64_t z = z0; z <= z1; ++z) {
            scan_cell(q, x, y0, z, best_d2, best);
            scan_cell(q, x, y1, z, best_d2, best);
          }
        for (int64_t x = x0 + 1; x <= x1 - 1; ++x)
          for (int64_t y = y0 + 1; y <= y1 - 1; ++y) {
            scan_cell(q, x, y, z0, best_d2, best);
            scan_cell(q, x, y, z1, best_d2, best);
          }
      }
      if (best >= 0 && std::sqrt(best_d2) <= (double)r * cell) break;
    }
    return best;  // r_max rings cover every occupied cell, so best is set
  }
};

}  // namespace

std::vector<int64_t> nearest_indices(const std::vector<Vec3>& from,
                                     const std::vector<Vec3>& to) {
  contract_check(!to.empty(), "nearest_indices: empty target cloud");
  std::vector<int64_t> out(from.size());
  if (to.size() < kExhaustiveLimit) {
    for (size_t i = 0; i < from.size(); ++i)
      out[i] = nearest_exhaustive(from[i], to);
    return out;
  }
  const HashGrid grid(to);
  for (size_t i = 0; i < from.size(); ++i) out[i] = grid.nearest(from[i]);
  return out;
}

PointcloudMetrics pointcloud_metrics(const std::vector<Vec3>& pred_pts,
                                     const std::vector<Vec3>& gt_pts,
                                     const std::vector<Vec3>& pred_normals,
                                     const std::vector<Vec3>& gt_normals) {
  contract_check(!pred_pts.empty() && !gt_pts.empty(),
                 "pointcloud_metrics: empty cloud");
  contract_check(pred_normals.empty() ||
                     pred_normals.size() == pred_pts.size(),
                 "pointcloud_metrics: prediction normals mismatch cloud");
  contract_check(gt_normals.empty() || gt_normals.size() == gt_pts.size(),
                 "pointcloud_metrics: ground-truth normals mismatch cloud");

  const std::vector<int64_t> p2g = nearest_indices(pred_pts, gt_pts);
  const std::vector<int64_t> g2p = nearest_indices(gt_pts, pred_pts);

  PointcloudMetrics m;
  for (size_t i = 0; i < pred_pts.size(); ++i)
    m.acc += (pred_pts[i] - gt_pts[(size_t)p2g[i]]).norm();
  m.acc /= (double)pred_pts.size();
  for (size_t i = 0; i < gt_pts.size(); ++i)
    m.comp += (gt_pts[i] - pred_pts[(size_t)g2p[i]]).norm();
  m.comp /= (double)gt_pts.size();

  if (!pred_normals.empty() && !gt_normals.empty()) {
    auto abs_cos = [](const Vec3& a, const Vec3& b, double& sum,
                      int64_t& cnt) {
      const double na = a.norm(), nb = b.norm();
      if (na < 1e-12 || nb < 1e-12) return;
      sum += std::abs(a.dot(b)) / (na * nb);
      ++cnt;
    };
    double sum_p = 0.0, sum_g = 0.0;
    int64_t cnt_p = 0, cnt_g = 0;
    for (size_t i = 0; i < pred_pts.size(); ++i)
      abs_cos(pred_normals[i], gt_normals[(size_t)p2g[i]], sum_p, cnt_p);
    for (size_t i = 0; i < gt_pts.size(); ++i)
      abs_cos(gt_normals[i], pred_normals[(size_t)g2p[i]], sum_g, cnt_g);
    if (cnt_p > 0 && cnt_g > 0)
      m.nc = 0.5 * (sum_p / (double)cnt_p + sum_g / (double)cnt_g);
    else if (cnt_p > 0)
      m.nc = sum_p / (double)cnt_p;
    else if (cnt_g > 0)
      m.nc = sum_g / (double)cnt_g;
  }
  return m;
}

EvalReport evaluate(const EvalInputs& in, AlignmentMode mode) {
  contract_check(in.pred_poses.size() == in.gt_poses.size(),
                 "evaluate: pose counts differ");
  contract_check(in.pred_depths.size() == in.gt_depths.size(),
                 "evaluate: depth counts differ");

  EvalReport r;
  r.alignment_mode = mode;

  std::vector<CameraPose> poses = in.pred_poses;
  std::vector<DepthMap> depths = in.pred_depths;
  std::vector<Vec3> cloud = in.pred_cloud;
  std::vector<Vec3> normals = in.pred_normals;

  if (mode == AlignmentMode::kSim3) {
    Sim3 g;
    if (poses.size() >= 3) {
      std::vector<Vec3> cp, cg;
      for (size_t i = 0; i < poses.size(); ++i) {
        cp.push_back(camera_center(in.pred_poses[i]));
        cg.push_back(camera_center(in.gt_poses[i]));
      }
      g = align_sim3(cp, cg);
    } else if (cloud.size() == in.gt_cloud.size() && cloud.size() >= 3) {
      g = align_sim3(cloud, in.gt_cloud);
    } else {
      throw ContractError(
          "evaluate: Sim(3) alignment needs >= 3 poses or >= 3 paired "
          "points");
    }
    for (CameraPose& p : poses) p = apply_sim3_world(p, g);
    for (DepthMap& d : depths)
      for (double& z : d.depth) z *= g.scale;
    for (Vec3& x : cloud) x = g.apply(x);
    for (Vec3& nrm : normals) nrm = g.r * nrm;
  } else if (mode == AlignmentMode::kMedian) {
    const double s = align_median(in.pred_depths, in.gt_depths);
    for (DepthMap& d : depths)
      for (double& z : d.depth) z *= s;
    for (Vec3& x : cloud) x = x * s;
    for (CameraPose& p : poses) p.t = p.t * s;
  }

  if (!poses.empty()) {
    const TrajectoryMetrics tm = trajectory_metrics(poses, in.gt_poses,
                                                    false);
    r.ate = tm.ate;
    r.rpe_tra = tm.rpe_tra;
    r.rpe_rot = tm.rpe_rot;
  }
  if (!depths.empty()) {
    const DepthMetrics dm = depth_metrics(depths, in.gt_depths);
    r.absrel = dm.absrel;
    r.rmse = dm.rmse;
    r.delta125 = dm.delta125;
  }
  if (!cloud.empty() && !in.gt_cloud.empty()) {
    const PointcloudMetrics pm =
        pointcloud_metrics(cloud, in.gt_cloud, normals, in.gt_normals);
    r.acc = pm.acc;
    r.comp = pm.comp;
    r.nc = pm.nc;
  }
  return r;
}

namespace {

std::string fmt_opt(const std::optional<double>& v) {
  if (!v) return "";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", *v);
  return buf;
}

}  // namespace

std::string report_csv(const EvalReport& r) {
  std::ostringstream os;
  os << "alignment,ate,rpe_tra,rpe_rot,absrel,rmse,delta125,acc,comp,nc\n";
  os << to_string(r.alignment_mode) << ',' << fmt_opt(r.ate) << ','
     << fmt_opt(r.rpe_tra) << ',' << fmt_opt(r.rpe_rot) << ','
     << fmt_opt(r.absrel) << ',' << fmt_opt(r.rmse) << ','
     << fmt_opt(r.delta125) << ',' << fmt_opt(r.acc) << ','
     << fmt_opt(r.comp) << ',' << fmt_opt(r.nc) << '\n';
  return os.str();
}

std::string report_table(const EvalReport& r) {
  const std::pair<const char*, const std::optional<double>*> rows[] = {
      {"ate", &r.ate},         {"rpe_tra", &r.rpe_tra},
      {"rpe_rot", &r.rpe_rot}, {"absrel", &r.absrel},
      {"rmse", &r.rmse},       {"delta125", &r.delta125},
      {"acc", &r.acc},         {"comp", &r.comp},
      {"nc", &r.nc},
  };
  std::ostringstream os;
  char buf[96];
  std::snprintf(buf, sizeof buf, "%-10s %s\n", "alignment",
                to_string(r.alignment_mode).c_str());
  os << buf;
  for (const auto& [name, v] : rows) {
    const std::string val = *v ? fmt_opt(*v) : "n/a";
    std::snprintf(buf, sizeof buf, "%-10s %s\n", name, val.c_str());
    os << buf;
  }
  return os.str();
}

namespace {

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '&')
      out += "&amp;";
    else if (c == '<')
      out += "&lt;";
    else if (c == '>')
      out += "&gt;";
    else
      out += c;
  }
  return out;
}

std::string px(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

}  // namespace

void write_svg_line_chart(const std::string& path, const std::string& title,
                          const std::string& x_label,
                          const std::string& y_label,
                          const std::vector<ChartSeries>& series) {
  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  size_t n_points = 0;
  for (const ChartSeries& s : series)
    for (const auto& [x, y] : s.pts) {
      xmin = std::min(xmin, x);
      xmax = std::max(xmax, x);
      ymin = std::min(ymin, y);
      ymax = std::max(ymax, y);
      ++n_points;
    }
  contract_check(n_points > 0, "write_svg_line_chart: no data points");
  if (xmax - xmin < 1e-12) {
    xmin -= 1.0;
    xmax += 1.0;
  }
  if (ymax - ymin < 1e-12) {
    ymin -= 1.0;
    ymax += 1.0;
  }

  const double kw = 640, kh = 400;
  const double ml = 64, mr = 20, mt = 40, mb = 48;
  auto sx = [&](double x) {
    return ml + (x - xmin) / (xmax - xmin) * (kw - ml - mr);
  };
  auto sy = [&](double y) {
    return kh - mb - (y - ymin) / (ymax - ymin) * (kh - mt - mb);
  };
  static const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c",
                                   "#9467bd", "#ff7f0e", "#8c564b"};
  constexpr int kPaletteSize = 6;

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" "
        "height=\"400\" viewBox=\"0 0 640 400\">\n";
  os << "<rect width=\"640\" height=\"400\" fill=\"white\"/>\n";
  os << "<text x=\"320\" y=\"22\" text-anchor=\"middle\" "
        "font-family=\"sans-serif\" font-size=\"15\">"
     << xml_escape(title) << "</text>\n";

  // Axes with five ticks each.
  os << "<line x1=\"" << px(ml) << "\" y1=\"" << px(kh - mb) << "\" x2=\""
     << px(kw - mr) << "\" y2=\"" << px(kh - mb)
     << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << px(ml) << "\" y1=\"" << px(mt) << "\" x2=\""
     << px(ml) << "\" y2=\"" << px(kh - mb) << "\" stroke=\"black\"/>\n";
  for (int i = 0; i < 5; ++i) {
    const double fx = xmin + (xmax - xmin) * i / 4.0;
    const double fy = ymin + (ymax - ymin) * i / 4.0;
    os << "<line x1=\"" << px(sx(fx)) << "\" y1=\"" << px(kh - mb)
       << "\" x2=\"" << px(sx(fx)) << "\" y2=\"" << px(kh - mb + 5)
       << "\" stroke=\"black\"/>\n";
    os << "<text x=\"" << px(sx(fx)) << "\" y=\"" << px(kh - mb + 18)
       << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
          "font-size=\"11\">"
       << tick_label(fx) << "</text>\n";
    os << "<line x1=\"" << px(ml - 5) << "\" y1=\"" << px(sy(fy))
       << "\" x2=\"" << px(ml) << "\" y2=\"" << px(sy(fy))
       << "\" stroke=\"black\"/>\n";
    os << "<text x=\"" << px(ml - 8) << "\" y=\"" << px(sy(fy) + 4)
       << "\" text-anchor=\"end\" font-family=\"sans-serif\" "
          "font-size=\"11\">"
       << tick_label(fy) << "</text>\n";
  }
  os << "<text x=\"" << px((ml + kw - mr) / 2) << "\" y=\"" << px(kh - 10)
     << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
        "font-size=\"12\">"
     << xml_escape(x_label) << "</text>\n";
  os << "<text x=\"16\" y=\"" << px((mt + kh - mb) / 2)
     << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
        "font-size=\"12\" transform=\"rotate(-90 16 "
     << px((mt + kh - mb) / 2) << ")\">" << xml_escape(y_label)
     << "</text>\n";

  for (size_t si = 0; si < series.size(); ++si) {
    const char* color = kPalette[si % kPaletteSize];
    if (!series[si].pts.empty()) {
      os << "<polyline fill=\"none\" stroke=\"" << color
         << "\" stroke-width=\"1.5\" points=\"";
      for (size_t i = 0; i < series[si].pts.size(); ++i) {
        if (i) os << ' ';
        os << px(sx(series[si].pts[i].first)) << ','
           << px(sy(series[si].pts[i].second));
      }
      os << "\"/>\n";
      for (const auto& [x, y] : series[si].pts)
        os << "<circle cx=\"" << px(sx(x)) << "\" cy=\"" << px(sy(y))
           << "\" r=\"2.5\" fill=\"" << color << "\"/>\n";
    }
    const double ly = mt + 14.0 * (double)si;
    os << "<line x1=\"" << px(kw - mr - 120) << "\" y1=\"" << px(ly)
       << "\" x2=\"" << px(kw - mr - 100) << "\" y2=\"" << px(ly)
       << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    os << "<text x=\"" << px(kw - mr - 95) << "\" y=\"" << px(ly + 4)
       << "\" font-family=\"sans-serif\" font-size=\"11\">"
       << xml_escape(series[si].name) << "</text>\n";
  }
  os << "</svg>\n";

  std::ofstream f(path, std::ios::binary);
  contract_check(f.good(), "write_svg_line_chart: cannot open " + path);
  f << os.str();
}

}  // namespace gart
