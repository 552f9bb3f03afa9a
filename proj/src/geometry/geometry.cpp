#include "gart/geometry.hpp"

#include <algorithm>
#include <array>

#include "gart/ops.hpp"

namespace gart {

namespace {

// Cyclic Jacobi eigendecomposition of a symmetric 3x3. Returns eigenvalues in
// descending order with matching columns of v.
void jacobi_eigen3(const Mat3& a_in, Vec3& eval, Mat3& v) {
  Mat3 a = a_in;
  v = Mat3::identity();
  for (int sweep = 0; sweep < 32; ++sweep) {
    const double off = a.at(0, 1) * a.at(0, 1) + a.at(0, 2) * a.at(0, 2) +
                       a.at(1, 2) * a.at(1, 2);
    if (off < 1e-60) break;
    static constexpr int pairs[3][2] = {{0, 1}, {0, 2}, {1, 2}};
    for (const auto& pq : pairs) {
      const int p = pq[0], q = pq[1];
      const double apq = a.at(p, q);
      if (apq == 0.0) continue;
      const double tau = (a.at(q, q) - a.at(p, p)) / (2.0 * apq);
      const double t = (tau >= 0.0 ? 1.0 : -1.0) /
                       (std::abs(tau) + std::sqrt(1.0 + tau * tau));
      const double c = 1.0 / std::sqrt(1.0 + t * t);
      const double s = t * c;
      // A <- J^T A J for the (p,q) rotation.
      for (int i = 0; i < 3; ++i) {
        const double aip = a.at(i, p), aiq = a.at(i, q);
        a.at(i, p) = c * aip - s * aiq;
        a.at(i, q) = s * aip + c * aiq;
      }
      for (int j = 0; j < 3; ++j) {
        const double apj = a.at(p, j), aqj = a.at(q, j);
        a.at(p, j) = c * apj - s * aqj;
        a.at(q, j) = s * apj + c * aqj;
      }
      for (int i = 0; i < 3; ++i) {
        const double vip = v.at(i, p), viq = v.at(i, q);
        v.at(i, p) = c * vip - s * viq;
        v.at(i, q) = s * vip + c * viq;
      }
    }
  }
  std::array<int, 3> order = {0, 1, 2};
  const double d[3] = {a.at(0, 0), a.at(1, 1), a.at(2, 2)};
  std::sort(order.begin(), order.end(),
            [&](int i, int j) { return d[i] > d[j]; });
  eval = {d[order[0]], d[order[1]], d[order[2]]};
  Mat3 vs;
  for (int c = 0; c < 3; ++c) vs.set_col(c, v.col(order[c]));
  v = vs;
}

}  // namespace

Svd3 svd3(const Mat3& m) {
  Vec3 lambda;
  Mat3 v;
  jacobi_eigen3(m.transposed() * m, lambda, v);
  if (v.det() < 0.0) v.set_col(2, -v.col(2));

  const Vec3 mv1 = m * v.col(0);
  const double s1 = mv1.norm();
  contract_check(s1 >= 1e-12, "svd3: rank-deficient input (sigma_max ~ 0)");
  const Vec3 u1 = mv1 * (1.0 / s1);

  Vec3 mv2 = m * v.col(1);
  const Vec3 w = mv2 - u1 * u1.dot(mv2);
  const double s2 = w.norm();
  contract_check(s2 >= 1e-12, "svd3: rank-deficient input (sigma_2 ~ 0)");
  const Vec3 u2 = w * (1.0 / s2);

  const Vec3 u3 = u1.cross(u2);  // right-handed, det(U) = +1
  const double s3 = u3.dot(m * v.col(2));

  Svd3 out;
  out.u.set_col(0, u1);
  out.u.set_col(1, u2);
  out.u.set_col(2, u3);
  out.sigma = {s1, u2.dot(mv2), s3};
  out.v = v;
  return out;
}

Mat3 orthogonalize(const Mat3& m) {
  const Svd3 s = svd3(m);  // throws on sigma_2 ~ 0
  contract_check(std::abs(s.sigma.z) >= 1e-12,
                 "orthogonalize: rank-deficient input (sigma_min < 1e-12)");
  return s.u * s.v.transposed();
}

Mat3 orthogonalize_vjp(const Mat3& m, const Mat3& gbar) {
  // With m = U diag(sigma) V^T (signed convention) and R = U V^T, the
  // differential is dR = U B V^T where B is skew with
  //   B_ij = (A_ij - A_ji) / (sigma_i + sigma_j),  A = U^T dM V.
  // Transposing that linear map gives grad_M = U C V^T with
  //   C_ij = (W_ij - W_ji) / (sigma_i + sigma_j),  W = U^T gbar V.
  const Svd3 s = svd3(m);
  const Mat3 w = s.u.transposed() * gbar * s.v;
  const double sig[3] = {s.sigma.x, s.sigma.y, s.sigma.z};
  Mat3 c;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      if (i == j) continue;
      double denom = sig[i] + sig[j];
      // Repeated-extreme singular values with det < 0 make the projection
      // non-differentiable; clamp so training gets a finite (sub)gradient.
      if (std::abs(denom) < 1e-9) denom = denom < 0.0 ? -1e-9 : 1e-9;
      c.at(i, j) = (w.at(i, j) - w.at(j, i)) / denom;
    }
  }
  return s.u * c * s.v.transposed();
}

double geodesic_rot_distance(const Mat3& ra, const Mat3& rb) {
  double tr = 0.0;
  for (int i = 0; i < 9; ++i) tr += ra.m[i] * rb.m[i];  // trace(ra^T rb)
  double arg = (tr - 1.0) / 2.0;
  arg = std::clamp(arg, -1.0, 1.0);
  return std::acos(arg);
}

double geodesic_degrees(const Mat3& ra, const Mat3& rb) {
  return geodesic_rot_distance(ra, rb) * (180.0 / M_PI);
}

std::vector<Vec3> local_ray_map(const Intrinsics& k, int64_t h, int64_t w) {
  contract_check(h > 0 && w > 0, "local_ray_map: empty grid");
  contract_check(k.fx > 0 && k.fy > 0, "local_ray_map: non-positive focal");
  std::vector<Vec3> rays((size_t)(h * w));
  for (int64_t v = 0; v < h; ++v) {
    for (int64_t u = 0; u < w; ++u) {
      const Vec3 d{((double)u + 0.5 - k.cx) / k.fx,
                   ((double)v + 0.5 - k.cy) / k.fy, 1.0};
      rays[(size_t)(v * w + u)] = d.normalized();
    }
  }
  return rays;
}

PointMap local_points_from_depth(const DepthMap& d, const Intrinsics& k) {
  contract_check(k.fx > 0 && k.fy > 0,
                 "local_points_from_depth: non-positive focal");
  PointMap p;
  p.init(d.h, d.w);
  for (int64_t v = 0; v < d.h; ++v) {
    for (int64_t u = 0; u < d.w; ++u) {
      const size_t i = d.at(v, u);
      if (!d.valid[i]) continue;
      const double z = d.depth[i];
      p.pts[i] = {((double)u + 0.5 - k.cx) / k.fx * z,
                  ((double)v + 0.5 - k.cy) / k.fy * z, z};
      p.valid[i] = 1;
    }
  }
  return p;
}

PointMap global_from_local(const PointMap& local, const CameraPose& pose) {
  PointMap g;
  g.init(local.h, local.w);
  const CameraPose inv = inverse(pose);
  for (size_t i = 0; i < local.pts.size(); ++i) {
    if (!local.valid[i]) continue;
    g.pts[i] = apply_pose(inv, local.pts[i]);
    g.valid[i] = 1;
  }
  return g;
}

PointMap local_from_global(const PointMap& global, const CameraPose& pose) {
  PointMap l;
  l.init(global.h, global.w);
  for (size_t i = 0; i < global.pts.size(); ++i) {
    if (!global.valid[i]) continue;
    l.pts[i] = apply_pose(pose, global.pts[i]);
    l.valid[i] = 1;
  }
  return l;
}

NormalMap surface_normals(const PointMap& p) {
  NormalMap n;
  n.init(p.h, p.w);
  for (int64_t y = 0; y + 1 < p.h; ++y) {
    for (int64_t x = 0; x + 1 < p.w; ++x) {
      const size_t i = p.at(y, x);
      if (!p.valid[i] || !p.valid[p.at(y, x + 1)] || !p.valid[p.at(y + 1, x)])
        continue;
      const Vec3 dh = p.pts[p.at(y, x + 1)] - p.pts[i];
      const Vec3 dv = p.pts[p.at(y + 1, x)] - p.pts[i];
      const Vec3 raw = dh.cross(dv);
      const double nr = raw.norm();
      if (nr < 1e-12) continue;
      n.pts[i] = raw * (1.0 / nr);
      n.valid[i] = 1;
    }
  }
  return n;
}

double sequence_scale(const std::vector<DepthMap>& depths) {
  double acc = 0.0;
  int64_t count = 0;
  for (const auto& d : depths) {
    for (size_t i = 0; i < d.depth.size(); ++i) {
      if (!d.valid[i]) continue;
      acc += d.depth[i] * d.depth[i];
      ++count;
    }
  }
  contract_check(count > 0, "sequence_scale: no valid depths in sequence");
  return std::sqrt(acc / (double)count);
}

double sequence_scale_z(const std::vector<PointMap>& maps) {
  double acc = 0.0;
  int64_t count = 0;
  for (const auto& m : maps) {
    for (size_t i = 0; i < m.pts.size(); ++i) {
      if (!m.valid[i]) continue;
      acc += m.pts[i].z * m.pts[i].z;
      ++count;
    }
  }
  contract_check(count > 0, "sequence_scale_z: no valid points in sequence");
  return std::sqrt(acc / (double)count);
}

// Differentiable nearest-rotation projection on a [3,3] (or [9]) tensor.
template <typename T>
Tensor<T> orthogonalize_op(const Tensor<T>& m) {
  contract_check(m.numel() == 9, "orthogonalize_op: input must have 9 values");
  Mat3 md;
  for (int i = 0; i < 9; ++i) md.m[i] = (double)m.data()[i];
  const Mat3 r = orthogonalize(md);
  auto out = Tensor<T>::zeros({3, 3});
  for (int i = 0; i < 9; ++i) out.mutable_data()[i] = T(r.m[i]);
  auto node = out.node();
  auto pm = m.node();
  if (pm->requires_grad) {
    node->requires_grad = true;
    node->is_leaf = false;
    node->parents = {pm};
    node->vjp = [pm, md](TensorNode<T>& self) {
      Mat3 gbar;
      for (int i = 0; i < 9; ++i) gbar.m[i] = (double)self.grad[(size_t)i];
      const Mat3 gm = orthogonalize_vjp(md, gbar);
      pm->ensure_grad();
      for (int i = 0; i < 9; ++i) pm->grad[(size_t)i] += T(gm.m[i]);
    };
  }
  return out;
}

template Tensor<float> orthogonalize_op(const Tensor<float>&);
template Tensor<double> orthogonalize_op(const Tensor<double>&);

}  // namespace gart
