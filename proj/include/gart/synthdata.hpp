#pragma once

// Seed-deterministic synthetic scenes: random primitive layouts, smooth
// orbital camera paths, analytic ray-cast depth, and shaded grayscale
// renders. Also the modality / sparse-depth samplers that training draws
// from. Everything here is pure: the same seed always yields the same bytes.

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "gart/geometry.hpp"

namespace gart {

struct Sphere {
  Vec3 center;
  double radius;
  double albedo;
};

struct Box {  // axis-aligned
  Vec3 center;
  Vec3 half;
  double albedo;
};

struct Plane {  // infinite
  Vec3 point;
  Vec3 normal;  // unit
  double albedo;
};

using Primitive = std::variant<Sphere, Box, Plane>;

struct SceneSpec {
  std::vector<Primitive> prims;
};

struct RayHit {
  bool hit = false;
  double t = 0.0;   // parameter along the (possibly unnormalized) direction
  Vec3 normal{0, 0, 0};  // unit, facing the ray origin
  double albedo = 0.0;
};

// Nearest intersection with t > t_min. Directions need not be unit length;
// t is reported in units of the given direction.
RayHit raycast(const SceneSpec& spec, const Vec3& origin, const Vec3& dir,
               double t_min);

struct SceneFrame {
  std::vector<double> image;  // h*w grayscale in [0, 1]
  DepthMap depth;             // camera-z depth; invalid where rays miss
  CameraPose pose;            // world -> camera
  Intrinsics k;
};

struct SceneSequence {
  int64_t h = 0, w = 0;
  uint64_t seed = 0;
  SceneSpec spec;
  std::vector<SceneFrame> frames;

  // Per-frame local point maps derived from depth and intrinsics; the z
  // channel reproduces the stored depth exactly.
  std::vector<PointMap> local_points() const;
};

// Renders one view of a scene; depth is the camera-z of the nearest hit,
// clamped to a 0.05 near plane (closer or missing -> invalid).
SceneFrame render_frame(const SceneSpec& spec, const CameraPose& pose,
                        const Intrinsics& k, int64_t h, int64_t w);

SceneSequence generate_scene(uint64_t seed, int64_t n_frames, int64_t h,
                             int64_t w);

// --- Modality and sparsity sampling ----------------------------------------

enum class DepthPattern { kUniform, kLidar, kSfm, kGrid };

struct PatternSpec {
  DepthPattern kind = DepthPattern::kUniform;
  double density = 1.0;  // UNIFORM keep probability
  int64_t beams = 1;     // LIDAR scanline count
  int64_t stride = 1;    // GRID downsampling factor
};

struct FrameModalities {
  bool has_depth = false;
  bool has_intrinsics = false;
  bool has_pose = false;
  PatternSpec pattern;  // meaningful only when has_depth
};

// Image-only with probability 0.1; otherwise each modality flips an
// independent fair coin per frame, and depth frames get a random pattern.
std::vector<FrameModalities> sample_modalities(uint64_t seed,
                                               int64_t n_frames);

// Drops depth pixels according to the pattern; retained values are exact
// copies. SFM keeps gradient-magnitude local maxima of the image, so it
// needs the frame's render.
DepthMap sparsify_depth(const DepthMap& d, const PatternSpec& p,
                        uint64_t seed,
                        const std::vector<double>* image = nullptr);

// Centered equal-spacing scanline rows: row_k = floor((k+0.5)*h/b - 0.5).
std::vector<int64_t> lidar_rows(int64_t h, int64_t beams);

// --- Disk layout ------------------------------------------------------------

// dir/images/NNN.gten, dir/depth/NNN.gten (invalid pixels stored as 0),
// dir/poses.txt (12 reals per line, rotation rows then translation),
// dir/intrinsics.txt, dir/manifest.txt (key=value).
void save_scene(const SceneSequence& seq, const std::string& dir);
SceneSequence load_scene(const std::string& dir);

}  // namespace gart
