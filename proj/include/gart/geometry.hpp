#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "gart/error.hpp"

namespace gart {

struct Vec3 {
  double x = 0, y = 0, z = 0;

  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  Vec3 operator-() const { return {-x, -y, -z}; }
  double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
  Vec3 cross(const Vec3& o) const {
    return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
  }
  double norm() const { return std::sqrt(dot(*this)); }
  Vec3 normalized() const {
    const double n = norm();
    contract_check(n > 0.0, "Vec3::normalized: zero vector");
    return {x / n, y / n, z / n};
  }
  double operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }
};

// Row-major 3x3.
struct Mat3 {
  double m[9] = {0, 0, 0, 0, 0, 0, 0, 0, 0};

  static Mat3 identity() { return {{1, 0, 0, 0, 1, 0, 0, 0, 1}}; }
  double& at(int r, int c) { return m[r * 3 + c]; }
  double at(int r, int c) const { return m[r * 3 + c]; }

  Mat3 operator*(const Mat3& o) const {
    Mat3 r;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        double s = 0;
        for (int k = 0; k < 3; ++k) s += at(i, k) * o.at(k, j);
        r.at(i, j) = s;
      }
    return r;
  }
  Vec3 operator*(const Vec3& v) const {
    return {m[0] * v.x + m[1] * v.y + m[2] * v.z,
            m[3] * v.x + m[4] * v.y + m[5] * v.z,
            m[6] * v.x + m[7] * v.y + m[8] * v.z};
  }
  Mat3 operator+(const Mat3& o) const {
    Mat3 r;
    for (int i = 0; i < 9; ++i) r.m[i] = m[i] + o.m[i];
    return r;
  }
  Mat3 operator-(const Mat3& o) const {
    Mat3 r;
    for (int i = 0; i < 9; ++i) r.m[i] = m[i] - o.m[i];
    return r;
  }
  Mat3 operator*(double s) const {
    Mat3 r;
    for (int i = 0; i < 9; ++i) r.m[i] = m[i] * s;
    return r;
  }
  Mat3 transposed() const {
    return {{m[0], m[3], m[6], m[1], m[4], m[7], m[2], m[5], m[8]}};
  }
  double det() const {
    return m[0] * (m[4] * m[8] - m[5] * m[7]) -
           m[1] * (m[3] * m[8] - m[5] * m[6]) +
           m[2] * (m[3] * m[7] - m[4] * m[6]);
  }
  double trace() const { return m[0] + m[4] + m[8]; }
  Vec3 col(int c) const { return {m[c], m[3 + c], m[6 + c]}; }
  void set_col(int c, const Vec3& v) {
    m[c] = v.x;
    m[3 + c] = v.y;
    m[6 + c] = v.z;
  }
  double frobenius_dist(const Mat3& o) const {
    double s = 0;
    for (int i = 0; i < 9; ++i) s += (m[i] - o.m[i]) * (m[i] - o.m[i]);
    return std::sqrt(s);
  }
};

// SVD m = U diag(sigma) V^T with U, V proper rotations. sigma[0] >= sigma[1]
// >= |sigma[2]|, and sigma[2] carries the sign of det(m). This signed
// convention makes U V^T the nearest rotation for any full-rank input.
struct Svd3 {
  Mat3 u;
  Vec3 sigma;
  Mat3 v;
};
Svd3 svd3(const Mat3& m);

// Nearest rotation in Frobenius norm. Throws ContractError when the smallest
// singular value is below 1e-12.
Mat3 orthogonalize(const Mat3& m);

// Gradient of orthogonalize: maps the output cotangent gbar to the input
// cotangent. Exact away from repeated singular values; denominators are
// clamped near the degenerate set so training never sees non-finite values.
Mat3 orthogonalize_vjp(const Mat3& m, const Mat3& gbar);

// Geodesic distance between rotations, radians in [0, pi]. The arccos
// argument is clamped to [-1, 1].
double geodesic_rot_distance(const Mat3& ra, const Mat3& rb);

// World-to-camera map: P_cam = r * X_world + t.
struct CameraPose {
  Mat3 r = Mat3::identity();
  Vec3 t;
};

inline CameraPose compose(const CameraPose& a, const CameraPose& b) {
  // (a o b)(X) = a(b(X)).
  return {a.r * b.r, a.r * b.t + a.t};
}
inline CameraPose inverse(const CameraPose& p) {
  const Mat3 rt = p.r.transposed();
  return {rt, -(rt * p.t)};
}
// Pose of camera j expressed in camera i: [R|T]_i composed with the inverse
// of [R|T]_j. Invariant under composing any common world-frame rigid motion
// onto both inputs.
inline CameraPose relative_pose(const CameraPose& pi, const CameraPose& pj) {
  return compose(pi, inverse(pj));
}
inline Vec3 camera_center(const CameraPose& p) {
  return -(p.r.transposed() * p.t);
}
inline Vec3 apply_pose(const CameraPose& p, const Vec3& x) {
  return p.r * x + p.t;
}
// Re-expresses the world frame: X' = g(X). Relative poses are unchanged.
inline CameraPose with_world_frame(const CameraPose& p, const CameraPose& g) {
  return compose(p, g);
}

struct Intrinsics {
  double fx = 1, fy = 1, cx = 0, cy = 0;
};

struct DepthMap {
  int64_t h = 0, w = 0;
  std::vector<double> depth;   // h*w
  std::vector<uint8_t> valid;  // h*w

  void init(int64_t hh, int64_t ww) {
    h = hh;
    w = ww;
    depth.assign((size_t)(h * w), 0.0);
    valid.assign((size_t)(h * w), 0);
  }
  size_t at(int64_t y, int64_t x) const { return (size_t)(y * w + x); }
};

struct PointMap {
  int64_t h = 0, w = 0;
  std::vector<Vec3> pts;
  std::vector<uint8_t> valid;

  void init(int64_t hh, int64_t ww) {
    h = hh;
    w = ww;
    pts.assign((size_t)(h * w), Vec3{});
    valid.assign((size_t)(h * w), 0);
  }
  size_t at(int64_t y, int64_t x) const { return (size_t)(y * w + x); }
};

using NormalMap = PointMap;

// Unit ray through each pixel center (u + 0.5, v + 0.5) in camera
// coordinates; the principal point maps to (0, 0, 1).
std::vector<Vec3> local_ray_map(const Intrinsics& k, int64_t h, int64_t w);

// P(u,v) = K^-1 [u+.5, v+.5, 1]^T * depth, so the z channel reproduces the
// depth exactly.
PointMap local_points_from_depth(const DepthMap& d, const Intrinsics& k);

// X_world = R^T (P_cam - T).
PointMap global_from_local(const PointMap& local, const CameraPose& pose);
PointMap local_from_global(const PointMap& global, const CameraPose& pose);

// Forward-difference cross-product normals. A pixel's normal is valid only
// when the pixel and its +x / +y neighbors are valid and the cross product
// has norm >= 1e-12; the last row and column are always invalid.
NormalMap surface_normals(const PointMap& p);

// RMS over valid depths across the sequence; errors when nothing is valid.
double sequence_scale(const std::vector<DepthMap>& depths);
// Same, over the z channel of point maps.
double sequence_scale_z(const std::vector<PointMap>& maps);

double geodesic_degrees(const Mat3& ra, const Mat3& rb);

}  // namespace gart
