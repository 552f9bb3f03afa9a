#include "gart/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "gart/gten.hpp"
#include "gart/rng.hpp"
#include "gart/tensor.hpp"

namespace fs = std::filesystem;

namespace gart {

namespace {

constexpr double kNearPlane = 0.05;

struct HitCandidate {
  bool hit = false;
  double t = 0.0;
  Vec3 normal{0, 0, 0};
};

HitCandidate hit_sphere(const Sphere& s, const Vec3& o, const Vec3& d,
                        double t_min) {
  const Vec3 oc = o - s.center;
  const double a = d.dot(d);
  const double b = 2.0 * d.dot(oc);
  const double c = oc.dot(oc) - s.radius * s.radius;
  const double disc = b * b - 4.0 * a * c;
  if (disc < 0.0 || a <= 0.0) return {};
  const double sq = std::sqrt(disc);
  for (double t : {(-b - sq) / (2.0 * a), (-b + sq) / (2.0 * a)}) {
    if (t <= t_min) continue;
    const Vec3 p = o + d * t;
    Vec3 n = (p - s.center).normalized();
    if (n.dot(d) > 0.0) n = -n;  // interior hit: face the origin
    return {true, t, n};
  }
  return {};
}

HitCandidate hit_box(const Box& bx, const Vec3& o, const Vec3& d,
                     double t_min) {
  // Slab test; entry face normal. A camera inside the box sees nothing.
  double t_enter = -1e300, t_exit = 1e300;
  int axis = -1;
  double sign = 0.0;
  const double ov[3] = {o.x, o.y, o.z};
  const double dv[3] = {d.x, d.y, d.z};
  const double cv[3] = {bx.center.x, bx.center.y, bx.center.z};
  const double hv[3] = {bx.half.x, bx.half.y, bx.half.z};
  for (int i = 0; i < 3; ++i) {
    if (std::abs(dv[i]) < 1e-15) {
      if (std::abs(ov[i] - cv[i]) > hv[i]) return {};
      continue;
    }
    double t0 = (cv[i] - hv[i] - ov[i]) / dv[i];
    double t1 = (cv[i] + hv[i] - ov[i]) / dv[i];
    if (t0 > t1) std::swap(t0, t1);
    if (t0 > t_enter) {
      t_enter = t0;
      axis = i;
      // Entering along +d crosses the min face (outward -e), along -d the
      // max face (outward +e).
      sign = dv[i] > 0 ? -1.0 : 1.0;
    }
    t_exit = std::min(t_exit, t1);
    if (t_enter > t_exit) return {};
  }
  if (axis < 0 || t_enter <= t_min) return {};
  Vec3 n{0, 0, 0};
  if (axis == 0) n = {sign, 0, 0};
  if (axis == 1) n = {0, sign, 0};
  if (axis == 2) n = {0, 0, sign};
  return {true, t_enter, n};
}

HitCandidate hit_plane(const Plane& pl, const Vec3& o, const Vec3& d,
                       double t_min) {
  const double dn = d.dot(pl.normal);
  if (std::abs(dn) < 1e-15) return {};
  const double t = (pl.point - o).dot(pl.normal) / dn;
  if (t <= t_min) return {};
  return {true, t, dn < 0 ? pl.normal : -pl.normal};
}

}  // namespace

RayHit raycast(const SceneSpec& spec, const Vec3& origin, const Vec3& dir,
               double t_min) {
  RayHit best;
  for (const Primitive& prim : spec.prims) {
    HitCandidate c = std::visit(
        [&](const auto& p) -> HitCandidate {
          using P = std::decay_t<decltype(p)>;
          if constexpr (std::is_same_v<P, Sphere>)
            return hit_sphere(p, origin, dir, t_min);
          else if constexpr (std::is_same_v<P, Box>)
            return hit_box(p, origin, dir, t_min);
          else
            return hit_plane(p, origin, dir, t_min);
        },
        prim);
    if (!c.hit) continue;
    if (!best.hit || c.t < best.t) {
      best.hit = true;
      best.t = c.t;
      best.normal = c.normal;
      best.albedo = std::visit([](const auto& p) { return p.albedo; }, prim);
    }
  }
  return best;
}

std::vector<PointMap> SceneSequence::local_points() const {
  std::vector<PointMap> out;
  for (const SceneFrame& f : frames)
    out.push_back(local_points_from_depth(f.depth, f.k));
  return out;
}

SceneFrame render_frame(const SceneSpec& spec, const CameraPose& pose,
                        const Intrinsics& k, int64_t h, int64_t w) {
  SceneFrame f;
  f.pose = pose;
  f.k = k;
  f.depth.init(h, w);
  f.image.assign((size_t)(h * w), 0.0);

  const Vec3 center = camera_center(pose);
  const Mat3 rt = pose.r.transposed();
  for (int64_t v = 0; v < h; ++v)
    for (int64_t u = 0; u < w; ++u) {
      // Camera-frame direction with z = 1, so the ray parameter is exactly
      // the camera-z depth of the hit.
      const Vec3 dc{((double)u + 0.5 - k.cx) / k.fx,
                    ((double)v + 0.5 - k.cy) / k.fy, 1.0};
      const Vec3 dw = rt * dc;
      const RayHit hit = raycast(spec, center, dw, kNearPlane);
      const size_t i = (size_t)(v * w + u);
      if (!hit.hit) continue;
      f.depth.depth[i] = hit.t;
      f.depth.valid[i] = 1;
      const Vec3 view = dw.normalized();
      const double lambert = std::max(0.0, -view.dot(hit.normal));
      f.image[i] = hit.albedo * (0.15 + 0.85 * lambert);
    }
  return f;
}

namespace {

Vec3 catmull_rom(const Vec3& p0, const Vec3& p1, const Vec3& p2,
                 const Vec3& p3, double t) {
  const double t2 = t * t, t3 = t2 * t;
  return (p1 * 2.0 + (p2 - p0) * t +
          (p0 * 2.0 - p1 * 5.0 + p2 * 4.0 - p3) * t2 +
          (p1 * 3.0 - p0 - p2 * 3.0 + p3) * t3) *
         0.5;
}

CameraPose look_at(const Vec3& eye, const Vec3& target) {
  const Vec3 fwd = (target - eye).normalized();
  Vec3 up{0, 1, 0};
  if (std::abs(fwd.dot(up)) > 0.999) up = Vec3{1, 0, 0};
  const Vec3 right = up.cross(fwd).normalized();
  const Vec3 down = fwd.cross(right);
  CameraPose p;
  for (int c = 0; c < 3; ++c) {
    p.r.at(0, c) = right[c];
    p.r.at(1, c) = down[c];
    p.r.at(2, c) = fwd[c];
  }
  p.t = -(p.r * eye);
  return p;
}

struct SceneDraw {
  SceneSpec spec;
  std::vector<Vec3> positions;
  Vec3 target;
  Intrinsics k;
};

SceneDraw draw_scene(Rng& rng, int64_t n_frames, int64_t h, int64_t w) {
  SceneDraw d;
  // Extent is log-uniform over 2..10 m so small and large scenes are
  // equally represented.
  const double extent =
      std::exp(rng.uniform(std::log(2.0), std::log(10.0)));

  // Floor keeps most rays from escaping to infinity.
  d.spec.prims.push_back(
      Plane{{0.0, -0.5 * extent, 0.0}, {0.0, 1.0, 0.0},
            rng.uniform(0.4, 0.95)});
  const int64_t n_prims = 3 + (int64_t)rng.randint(6);
  for (int64_t i = 0; i < n_prims; ++i) {
    const Vec3 c{rng.uniform(-0.3, 0.3) * extent,
                 rng.uniform(-0.35, 0.1) * extent,
                 rng.uniform(-0.3, 0.3) * extent};
    if (rng.uniform() < 0.5) {
      d.spec.prims.push_back(
          Sphere{c, rng.uniform(0.08, 0.25) * extent,
                 rng.uniform(0.4, 0.95)});
    } else {
      d.spec.prims.push_back(
          Box{c,
              {rng.uniform(0.05, 0.2) * extent, rng.uniform(0.05, 0.2) * extent,
               rng.uniform(0.05, 0.2) * extent},
              rng.uniform(0.4, 0.95)});
    }
  }

  // Waypoints on a loose orbit, threaded by a spline.
  const int kWaypoints = 4;
  std::vector<Vec3> wps;
  for (int i = 0; i < kWaypoints; ++i) {
    const double az = 2.0 * 3.14159265358979323846 * i / kWaypoints +
                      rng.uniform(-0.3, 0.3);
    const double el = rng.uniform(0.1, 0.6);
    const double r = extent * rng.uniform(0.75, 1.15);
    wps.push_back({r * std::cos(el) * std::cos(az), r * std::sin(el),
                   r * std::cos(el) * std::sin(az)});
  }
  for (int64_t i = 0; i < n_frames; ++i) {
    const double u = n_frames == 1
                         ? 0.0
                         : (double)(kWaypoints - 1) * (double)i /
                               (double)(n_frames - 1);
    int seg = std::min((int)u, kWaypoints - 2);
    const double t = u - (double)seg;
    const Vec3 p0 = wps[(size_t)std::max(seg - 1, 0)];
    const Vec3 p3 = wps[(size_t)std::min(seg + 2, kWaypoints - 1)];
    d.positions.push_back(
        catmull_rom(p0, wps[(size_t)seg], wps[(size_t)(seg + 1)], p3, t));
  }
  d.target = Vec3{rng.uniform(-0.05, 0.05) * extent,
                  rng.uniform(-0.1, 0.0) * extent,
                  rng.uniform(-0.05, 0.05) * extent};

  const double fov = rng.uniform(50.0, 70.0) * 3.14159265358979323846 / 180.0;
  d.k.fx = 0.5 * (double)w / std::tan(0.5 * fov);
  d.k.fy = d.k.fx;
  d.k.cx = 0.5 * (double)w;
  d.k.cy = 0.5 * (double)h;
  return d;
}

}  // namespace

SceneSequence generate_scene(uint64_t seed, int64_t n_frames, int64_t h,
                             int64_t w) {
  contract_check(n_frames >= 1, "generate_scene: n_frames must be >= 1");
  contract_check(h >= 2 && w >= 2, "generate_scene: degenerate resolution");
  Rng rng(seed);
  for (int attempt = 0; attempt < 10; ++attempt) {
    SceneDraw d = draw_scene(rng, n_frames, h, w);
    if (n_frames > 1) {
      double len = 0.0;
      for (size_t i = 1; i < d.positions.size(); ++i)
        len += (d.positions[i] - d.positions[i - 1]).norm();
      if (len < 1e-9) continue;
    }
    SceneSequence seq;
    seq.h = h;
    seq.w = w;
    seq.seed = seed;
    seq.spec = d.spec;
    for (int64_t i = 0; i < n_frames; ++i) {
      const CameraPose pose = look_at(d.positions[(size_t)i], d.target);
      seq.frames.push_back(render_frame(d.spec, pose, d.k, h, w));
    }
    return seq;
  }
  throw ContractError("generate_scene: no usable trajectory in 10 attempts");
}

// --- Modality and sparsity sampling ----------------------------------------

std::vector<FrameModalities> sample_modalities(uint64_t seed,
                                               int64_t n_frames) {
  Rng rng(seed);
  std::vector<FrameModalities> out((size_t)n_frames);
  if (rng.uniform() < 0.1) return out;  // image-only sequence
  for (FrameModalities& m : out) {
    m.has_depth = rng.uniform() < 0.5;
    m.has_intrinsics = rng.uniform() < 0.5;
    m.has_pose = rng.uniform() < 0.5;
    if (!m.has_depth) continue;
    switch (rng.randint(4)) {
      case 0:
        m.pattern.kind = DepthPattern::kUniform;
        m.pattern.density = rng.uniform(0.05, 0.5);
        break;
      case 1:
        m.pattern.kind = DepthPattern::kLidar;
        m.pattern.beams = 2 + (int64_t)rng.randint(30);
        break;
      case 2:
        m.pattern.kind = DepthPattern::kSfm;
        break;
      default:
        m.pattern.kind = DepthPattern::kGrid;
        m.pattern.stride = int64_t{1} << (1 + rng.randint(3));  // 2, 4, 8
        break;
    }
  }
  return out;
}

std::vector<int64_t> lidar_rows(int64_t h, int64_t beams) {
  contract_check(beams >= 1, "lidar_rows: beams must be >= 1");
  const int64_t b = std::min(beams, h);
  std::vector<int64_t> rows;
  for (int64_t k = 0; k < b; ++k)
    rows.push_back((int64_t)std::floor(((double)k + 0.5) * (double)h /
                                           (double)b -
                                       0.5));
  return rows;
}

DepthMap sparsify_depth(const DepthMap& d, const PatternSpec& p,
                        uint64_t seed, const std::vector<double>* image) {
  DepthMap out;
  out.init(d.h, d.w);
  auto keep = [&](int64_t i) {
    out.depth[(size_t)i] = d.depth[(size_t)i];
    out.valid[(size_t)i] = d.valid[(size_t)i];
  };
  switch (p.kind) {
    case DepthPattern::kUniform: {
      contract_check(p.density >= 0.0 && p.density <= 1.0,
                     "sparsify_depth: density must be in [0, 1]");
      Rng rng(seed);
      for (int64_t i = 0; i < d.h * d.w; ++i)
        if (rng.uniform() < p.density) keep(i);
      break;
    }
    case DepthPattern::kLidar: {
      for (int64_t row : lidar_rows(d.h, p.beams))
        for (int64_t x = 0; x < d.w; ++x) keep(row * d.w + x);
      break;
    }
    case DepthPattern::kGrid: {
      contract_check(p.stride >= 1, "sparsify_depth: stride must be >= 1");
      for (int64_t y = 0; y < d.h; y += p.stride)
        for (int64_t x = 0; x < d.w; x += p.stride) keep(y * d.w + x);
      break;
    }
    case DepthPattern::kSfm: {
      contract_check(image != nullptr &&
                         (int64_t)image->size() == d.h * d.w,
                     "sparsify_depth: SFM pattern needs the frame image");
      // Gradient magnitude by central differences, clamped at borders.
      const std::vector<double>& img = *image;
      auto at = [&](int64_t y, int64_t x) {
        y = std::clamp(y, int64_t{0}, d.h - 1);
        x = std::clamp(x, int64_t{0}, d.w - 1);
        return img[(size_t)(y * d.w + x)];
      };
      std::vector<double> mag((size_t)(d.h * d.w));
      for (int64_t y = 0; y < d.h; ++y)
        for (int64_t x = 0; x < d.w; ++x) {
          const double gx = 0.5 * (at(y, x + 1) - at(y, x - 1));
          const double gy = 0.5 * (at(y + 1, x) - at(y - 1, x));
          mag[(size_t)(y * d.w + x)] = std::sqrt(gx * gx + gy * gy);
        }
      // Strict local maxima over the 8-neighborhood (ties suppressed on one
      // side by index order so plateaus keep a single representative).
      std::vector<std::pair<double, int64_t>> maxima;
      for (int64_t y = 0; y < d.h; ++y)
        for (int64_t x = 0; x < d.w; ++x) {
          const double m = mag[(size_t)(y * d.w + x)];
          if (m <= 0.0) continue;
          bool is_max = true;
          for (int64_t dy = -1; dy <= 1 && is_max; ++dy)
            for (int64_t dx = -1; dx <= 1 && is_max; ++dx) {
              if (dy == 0 && dx == 0) continue;
              const int64_t ny = y + dy, nx = x + dx;
              if (ny < 0 || ny >= d.h || nx < 0 || nx >= d.w) continue;
              const double o = mag[(size_t)(ny * d.w + nx)];
              if (o > m || (o == m && ny * d.w + nx < y * d.w + x))
                is_max = false;
            }
          if (is_max) maxima.emplace_back(-m, y * d.w + x);
        }
      std::sort(maxima.begin(), maxima.end());
      Rng rng(seed);
      const double frac = rng.uniform(0.01, 0.05);
      const size_t want = (size_t)std::llround(frac * (double)(d.h * d.w));
      const size_t take = std::min(std::max<size_t>(want, 1), maxima.size());
      for (size_t i = 0; i < take; ++i) keep(maxima[i].second);
      break;
    }
  }
  return out;
}

// --- Disk layout ------------------------------------------------------------

namespace {

std::string frame_name(int64_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%03lld", (long long)i);
  return buf;
}

Tensor64 image_tensor(const std::vector<double>& img, int64_t h, int64_t w) {
  return Tensor64::from_data({h, w}, img);
}

}  // namespace

void save_scene(const SceneSequence& seq, const std::string& dir) {
  fs::create_directories(fs::path(dir) / "images");
  fs::create_directories(fs::path(dir) / "depth");
  std::ofstream poses(fs::path(dir) / "poses.txt");
  poses.precision(17);
  for (size_t i = 0; i < seq.frames.size(); ++i) {
    const SceneFrame& f = seq.frames[i];
    save_gten((fs::path(dir) / "images" / (frame_name((int64_t)i) + ".gten"))
                  .string(),
              image_tensor(f.image, seq.h, seq.w));
    // Invalid pixels are stored as zero depth; validity is depth > 0.
    Tensor64 depth = image_tensor(f.depth.depth, seq.h, seq.w);
    save_gten(
        (fs::path(dir) / "depth" / (frame_name((int64_t)i) + ".gten"))
            .string(),
        depth);
    for (int j = 0; j < 9; ++j) poses << f.pose.r.m[j] << " ";
    poses << f.pose.t.x << " " << f.pose.t.y << " " << f.pose.t.z << "\n";
  }
  std::ofstream intr(fs::path(dir) / "intrinsics.txt");
  intr.precision(17);
  const Intrinsics& k = seq.frames.front().k;
  intr << k.fx << " " << k.fy << " " << k.cx << " " << k.cy << "\n";
  std::ofstream man(fs::path(dir) / "manifest.txt");
  man << "seed=" << seq.seed << "\n";
  man << "frames=" << seq.frames.size() << "\n";
  man << "height=" << seq.h << "\n";
  man << "width=" << seq.w << "\n";
  man << "primitives=" << seq.spec.prims.size() << "\n";
}

SceneSequence load_scene(const std::string& dir) {
  std::ifstream man(fs::path(dir) / "manifest.txt");
  if (!man.good())
    throw FormatError("load_scene: missing manifest in " + dir);
  SceneSequence seq;
  int64_t n_frames = 0;
  std::string line;
  while (std::getline(man, line)) {
    const size_t eq = line.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = line.substr(0, eq), val = line.substr(eq + 1);
    if (key == "seed") seq.seed = (uint64_t)std::stoull(val);
    if (key == "frames") n_frames = std::stoll(val);
    if (key == "height") seq.h = std::stoll(val);
    if (key == "width") seq.w = std::stoll(val);
  }
  if (n_frames < 1 || seq.h < 1 || seq.w < 1)
    throw FormatError("load_scene: manifest lacks frame dimensions");

  std::ifstream intr(fs::path(dir) / "intrinsics.txt");
  Intrinsics k;
  if (!(intr >> k.fx >> k.fy >> k.cx >> k.cy))
    throw FormatError("load_scene: unreadable intrinsics");
  std::ifstream poses(fs::path(dir) / "poses.txt");
  for (int64_t i = 0; i < n_frames; ++i) {
    SceneFrame f;
    f.k = k;
    for (int j = 0; j < 9; ++j)
      if (!(poses >> f.pose.r.m[j]))
        throw FormatError("load_scene: truncated poses.txt");
    if (!(poses >> f.pose.t.x >> f.pose.t.y >> f.pose.t.z))
      throw FormatError("load_scene: truncated poses.txt");

    Tensor64 img = load_gten<double>(
        (fs::path(dir) / "images" / (frame_name(i) + ".gten")).string());
    Tensor64 dep = load_gten<double>(
        (fs::path(dir) / "depth" / (frame_name(i) + ".gten")).string());
    if (img.rank() != 2 || img.dim(0) != seq.h || img.dim(1) != seq.w ||
        dep.rank() != 2 || dep.dim(0) != seq.h || dep.dim(1) != seq.w)
      throw FormatError("load_scene: tensor shape mismatch");
    f.image = img.vec();
    f.depth.init(seq.h, seq.w);
    for (int64_t p = 0; p < seq.h * seq.w; ++p) {
      f.depth.depth[(size_t)p] = dep.data()[p];
      f.depth.valid[(size_t)p] = dep.data()[p] > 0.0 ? 1 : 0;
    }
    seq.frames.push_back(std::move(f));
  }
  return seq;
}

}  // namespace gart
