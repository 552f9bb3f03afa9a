#pragma once

#include <vector>

#include "gart/tensor.hpp"

namespace gart {

// Graph-building ops. Outputs are fresh tensors; gradients flow to every
// parent with requires_grad. Shapes must match exactly: there is no implicit
// broadcasting, the *_rowvec / expand_lastdim ops cover the needed cases
// explicitly.

template <typename T> Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> div(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> neg(const Tensor<T>& a);
template <typename T> Tensor<T> add_const(const Tensor<T>& a, double c);
template <typename T> Tensor<T> mul_const(const Tensor<T>& a, double c);

template <typename T> Tensor<T> exp_t(const Tensor<T>& a);
template <typename T> Tensor<T> log_t(const Tensor<T>& a);
template <typename T> Tensor<T> sqrt_t(const Tensor<T>& a);
template <typename T> Tensor<T> abs_t(const Tensor<T>& a);
template <typename T> Tensor<T> gelu(const Tensor<T>& a);
// max(a, c); gradient passes only where a > c.
template <typename T> Tensor<T> clamp_min(const Tensor<T>& a, double c);
// acos(clamp(a, -1, 1)); gradient is zero at and beyond the clamp boundary.
template <typename T> Tensor<T> acos_clamped(const Tensor<T>& a);

// [m,k] x [k,n] -> [m,n], row-major.
template <typename T> Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> transpose2d(const Tensor<T>& a);

template <typename T> Tensor<T> reshape(const Tensor<T>& a, const Shape& s);

// Axis-0 views treat the tensor as [rows, inner].
template <typename T> Tensor<T> slice_rows(const Tensor<T>& a, int64_t r0, int64_t r1);
template <typename T> Tensor<T> concat_rows(const std::vector<Tensor<T>>& parts);
template <typename T> Tensor<T> gather_rows(const Tensor<T>& a, const std::vector<int64_t>& idx);

// 2D column views.
template <typename T> Tensor<T> slice_cols(const Tensor<T>& a, int64_t c0, int64_t c1);
template <typename T> Tensor<T> concat_cols(const std::vector<Tensor<T>>& parts);

template <typename T> Tensor<T> sum_all(const Tensor<T>& a);    // -> [1]
template <typename T> Tensor<T> mean_all(const Tensor<T>& a);   // -> [1]
// [..., k] -> [..., 1]
template <typename T> Tensor<T> sum_lastdim(const Tensor<T>& a);
// [..., 1] -> [..., k]
template <typename T> Tensor<T> expand_lastdim(const Tensor<T>& a, int64_t k);

// x:[n,k] (any leading shape collapsed to rows), v:[k].
template <typename T> Tensor<T> mul_rowvec(const Tensor<T>& x, const Tensor<T>& v);
template <typename T> Tensor<T> add_rowvec(const Tensor<T>& x, const Tensor<T>& v);

// Softmax over the last dim. -inf inputs produce exact zeros; rows of all
// -inf produce all-zero rows. Gradient is exact for both conventions.
template <typename T> Tensor<T> softmax_lastdim(const Tensor<T>& a);

// s is a [1] tensor participating in the graph.
template <typename T> Tensor<T> mul_scalar_t(const Tensor<T>& x, const Tensor<T>& s);
template <typename T> Tensor<T> div_scalar_t(const Tensor<T>& x, const Tensor<T>& s);

// matmul(x, w) + b per row.
template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b);

// Nearest-rotation projection of a [3,3] input, with an analytic VJP.
// Declared here, implemented with the geometry module's SVD.
template <typename T> Tensor<T> orthogonalize_op(const Tensor<T>& m);

}  // namespace gart
