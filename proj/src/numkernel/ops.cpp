#include "gart/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "gart/kernels.hpp"

namespace gart {

namespace {

template <typename T>
using NodePtr = std::shared_ptr<TensorNode<T>>;

template <typename T>
NodePtr<T> new_node(const Shape& shape) {
  auto n = std::make_shared<TensorNode<T>>();
  n->shape = shape;
  n->data.resize((size_t)shape_numel(shape));
  return n;
}

// Wires parents and the vjp closure iff any parent needs gradients.
template <typename T>
Tensor<T> finish(NodePtr<T> out, std::vector<NodePtr<T>> parents,
                 std::function<void(TensorNode<T>&)> vjp) {
  bool rg = false;
  for (const auto& p : parents) rg = rg || p->requires_grad;
  if (rg) {
    out->requires_grad = true;
    out->is_leaf = false;
    out->parents = std::move(parents);
    out->vjp = std::move(vjp);
  }
  return Tensor<T>::wrap(std::move(out));
}

template <typename T>
void check_same_shape(const Tensor<T>& a, const Tensor<T>& b,
                      const char* op) {
  contract_check(a.shape() == b.shape(),
                 std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                     " vs " + shape_str(b.shape()));
}

template <typename T>
int64_t rows_of(const Tensor<T>& a) {
  contract_check(a.rank() >= 1, "op requires rank >= 1");
  return a.dim(0);
}

}  // namespace

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  check_same_shape(a, b, "add");
  auto out = new_node<T>(a.shape());
  kern::kernels<T>().ew_add(a.data(), b.data(), out->data.data(), a.numel());
  auto pa = a.node(), pb = b.node();
  return finish<T>(out, {pa, pb}, [pa, pb](TensorNode<T>& self) {
    const int64_t n = (int64_t)self.data.size();
    if (pa->requires_grad) {
      pa->ensure_grad();
      kern::kernels<T>().axpy(T(1), self.grad.data(), pa->grad.data(), n);
    }
    if (pb->requires_grad) {
      pb->ensure_grad();
      kern::kernels<T>().axpy(T(1), self.grad.data(), pb->grad.data(), n);
    }
  });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  check_same_shape(a, b, "sub");
  auto out = new_node<T>(a.shape());
  kern::kernels<T>().ew_sub(a.data(), b.data(), out->data.data(), a.numel());
  auto pa = a.node(), pb = b.node();
  return finish<T>(out, {pa, pb}, [pa, pb](TensorNode<T>& self) {
    const int64_t n = (int64_t)self.data.size();
    if (pa->requires_grad) {
      pa->ensure_grad();
      kern::kernels<T>().axpy(T(1), self.grad.data(), pa->grad.data(), n);
    }
    if (pb->requires_grad) {
      pb->ensure_grad();
      kern::kernels<T>().axpy(T(-1), self.grad.data(), pb->grad.data(), n);
    }
  });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  check_same_shape(a, b, "mul");
  auto out = new_node<T>(a.shape());
  kern::kernels<T>().ew_mul(a.data(), b.data(), out->data.data(), a.numel());
  auto pa = a.node(), pb = b.node();
  return finish<T>(out, {pa, pb}, [pa, pb](TensorNode<T>& self) {
    const size_t n = self.data.size();
    if (pa->requires_grad) {
      pa->ensure_grad();
      for (size_t i = 0; i < n; ++i)
        pa->grad[i] += self.grad[i] * pb->data[i];
    }
    if (pb->requires_grad) {
      pb->ensure_grad();
      for (size_t i = 0; i < n; ++i)
        pb->grad[i] += self.grad[i] * pa->data[i];
    }
  });
}

template <typename T>
Tensor<T> div(const Tensor<T>& a, const Tensor<T>& b) {
  check_same_shape(a, b, "div");
  auto out = new_node<T>(a.shape());
  for (int64_t i = 0; i < a.numel(); ++i)
    out->data[(size_t)i] = a.data()[i] / b.data()[i];
  auto pa = a.node(), pb = b.node();
  return finish<T>(out, {pa, pb}, [pa, pb](TensorNode<T>& self) {
    const size_t n = self.data.size();
    if (pa->requires_grad) {
      pa->ensure_grad();
      for (size_t i = 0; i < n; ++i)
        pa->grad[i] += self.grad[i] / pb->data[i];
    }
    if (pb->requires_grad) {
      pb->ensure_grad();
      for (size_t i = 0; i < n; ++i)
        pb->grad[i] -= self.grad[i] * self.data[i] / pb->data[i];
    }
  });
}

template <typename T>
Tensor<T> neg(const Tensor<T>& a) {
  auto out = new_node<T>(a.shape());
  kern::kernels<T>().scale(T(-1), a.data(), out->data.data(), a.numel());
  auto pa = a.node();
  return finish<T>(out, {pa}, [pa](TensorNode<T>& self) {
    pa->ensure_grad();
    kern::kernels<T>().axpy(T(-1), self.grad.data(), pa->grad.data(),
                            (int64_t)self.data.size());
  });
}

template <typename T>
Tensor<T> add_const(const Tensor<T>& a, double c) {
  auto out = new_node<T>(a.shape());
  const T cv = T(c);
  for (int64_t i = 0; i < a.numel(); ++i) out->data[(size_t)i] = a.data()[i] + cv;
  auto pa = a.node();
  return finish<T>(out, {pa}, [pa](TensorNode<T>& self) {
    pa->ensure_grad();
    kern::kernels<T>().axpy(T(1), self.grad.data(), pa->grad.data(),
                            (int64_t)self.data.size());
  });
}

template <typename T>
Tensor<T> mul_const(const Tensor<T>& a, double c) {
  auto out = new_node<T>(a.shape());
  kern::kernels<T>().scale(T(c), a.data(), out->data.data(), a.numel());
  auto pa = a.node();
  return finish<T>(out, {pa, }, [pa, c](TensorNode<T>& self) {
    pa->ensure_grad();
    kern::kernels<T>().axpy(T(c), self.grad.data(), pa->grad.data(),
                            (int64_t)self.data.size());
  });
}

template <typename T>
Tensor<T> exp_t(const Tensor<T>& a) {
  auto out = new_node<T>(a.shape());
  for (int64_t i = 0; i < a.numel(); ++i)
    out->data[(size_t)i] = T(std::exp((double)a.data()[i]));
  auto pa = a.node();
  return finish<T>(out, {pa}, [pa](TensorNode<T>& self) {
    pa->ensure_grad();
    for (size_t i = 0; i < self.data.size(); ++i)
      pa->grad[i] += self.grad[i] * self.data[i];
  });
}

template <typename T>
Tensor<T> log_t(const Tensor<T>& a) {
  auto out = new_node<T>(a.shape());
  for (int64_t i = 0; i < a.numel(); ++i)
    out->data[(size_t)i] = T(std::log((double)a.data()[i]));
  auto pa = a.node();
  return finish<T>(out, {pa}, [pa](TensorNode<T>& self) {
    pa->ensure_grad();
    for (size_t i = 0; i < self.data.size(); ++i)
      pa->grad[i] += self.grad[i] / pa->data[i];
  });
}

template <typename T>
Tensor<T> sqrt_t(const Tensor<T>& a) {
  auto out = new_node<T>(a.shape());
  for (int64_t i = 0; i < a.numel(); ++i)
    out->data[(size_t)i] = T(std::sqrt((double)a.data()[i]));
  auto pa = a.node();
  return finish<T>(out, {pa}, [pa](TensorNode<T>& self) {
    pa->ensure_grad();
    for (size_t i = 0; i < self.data.size(); ++i)
      pa->grad[i] += self.grad[i] * T(0.5) / self.data[i];
  });
}

template <typename T>
Tensor<T> abs_t(const Tensor<T>& a) {
  auto out = new_node<T>(a.shape());
  for (int64_t i = 0; i < a.numel(); ++i)
    out->data[(size_t)i] = std::abs(a.data()[i]);
  auto pa = a.node();
  return finish<T>(out, {pa}, [pa](TensorNode<T>& self) {
    pa->ensure_grad();
    for (size_t i = 0; i < self.data.size(); ++i) {
      const T x = pa->data[i];
      if (x > T(0))
        pa->grad[i] += self.grad[i];
      else if (x < T(0))
        pa->grad[i] -= self.grad[i];
    }
  });
}

template <typename T>
Tensor<T> gelu(const Tensor<T>& a) {
  auto out = new_node<T>(a.shape());
  for (int64_t i = 0; i < a.numel(); ++i) {
    const double x = (double)a.data()[i];
    out->data[(size_t)i] = T(0.5 * x * (1.0 + std::erf(x * M_SQRT1_2)));
  }
  auto pa = a.node();
  return finish<T>(out, {pa}, [pa](TensorNode<T>& self) {
    pa->ensure_grad();
    constexpr double kInvSqrt2Pi = 0.3989422804014326779399460599344;
    for (size_t i = 0; i < self.data.size(); ++i) {
      const double x = (double)pa->data[i];
      const double cdf = 0.5 * (1.0 + std::erf(x * M_SQRT1_2));
      const double pdf = kInvSqrt2Pi * std::exp(-0.5 * x * x);
      pa->grad[i] += self.grad[i] * T(cdf + x * pdf);
    }
  });
}

template <typename T>
Tensor<T> clamp_min(const Tensor<T>& a, double c) {
  auto out = new_node<T>(a.shape());
  const T cv = T(c);
  for (int64_t i = 0; i < a.numel(); ++i)
    out->data[(size_t)i] = a.data()[i] > cv ? a.data()[i] : cv;
  auto pa = a.node();
  return finish<T>(out, {pa}, [pa, cv](TensorNode<T>& self) {
    pa->ensure_grad();
    for (size_t i = 0; i < self.data.size(); ++i)
      if (pa->data[i] > cv) pa->grad[i] += self.grad[i];
  });
}

template <typename T>
Tensor<T> acos_clamped(const Tensor<T>& a) {
  auto out = new_node<T>(a.shape());
  for (int64_t i = 0; i < a.numel(); ++i) {
    double x = (double)a.data()[i];
    if (x < -1.0) x = -1.0;
    if (x > 1.0) x = 1.0;
    out->data[(size_t)i] = T(std::acos(x));
  }
  auto pa = a.node();
  return finish<T>(out, {pa}, [pa](TensorNode<T>& self) {
    pa->ensure_grad();
    for (size_t i = 0; i < self.data.size(); ++i) {
      const double x = (double)pa->data[i];
      if (x > -1.0 && x < 1.0)
        pa->grad[i] -= self.grad[i] * T(1.0 / std::sqrt(1.0 - x * x));
    }
  });
}

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  contract_check(a.rank() == 2 && b.rank() == 2,
                 "matmul: both operands must be rank 2");
  contract_check(a.dim(1) == b.dim(0),
                 "matmul: inner dims differ " + shape_str(a.shape()) + " x " +
                     shape_str(b.shape()));
  const int64_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  auto out = new_node<T>({m, n});
  kern::kernels<T>().mm_nn(a.data(), b.data(), out->data.data(), m, k, n);
  auto pa = a.node(), pb = b.node();
  return finish<T>(out, {pa, pb}, [pa, pb, m, k, n](TensorNode<T>& self) {
    // dA += G * B^T, dB += A^T * G, via materialized transposes.
    if (pa->requires_grad) {
      pa->ensure_grad();
      std::vector<T> bt((size_t)(n * k));
      for (int64_t i = 0; i < k; ++i)
        for (int64_t j = 0; j < n; ++j)
          bt[(size_t)(j * k + i)] = pb->data[(size_t)(i * n + j)];
      kern::kernels<T>().mm_nn_acc(self.grad.data(), bt.data(),
                                   pa->grad.data(), m, n, k);
    }
    if (pb->requires_grad) {
      pb->ensure_grad();
      std::vector<T> at((size_t)(k * m));
      for (int64_t i = 0; i < m; ++i)
        for (int64_t j = 0; j < k; ++j)
          at[(size_t)(j * m + i)] = pa->data[(size_t)(i * k + j)];
      kern::kernels<T>().mm_nn_acc(at.data(), self.grad.data(),
                                   pb->grad.data(), k, m, n);
    }
  });
}

template <typename T>
Tensor<T> transpose2d(const Tensor<T>& a) {
  contract_check(a.rank() == 2, "transpose2d: rank must be 2");
  const int64_t m = a.dim(0), n = a.dim(1);
  auto out = new_node<T>({n, m});
  for (int64_t i = 0; i < m; ++i)
    for (int64_t j = 0; j < n; ++j)
      out->data[(size_t)(j * m + i)] = a.data()[i * n + j];
  auto pa = a.node();
  return finish<T>(out, {pa}, [pa, m, n](TensorNode<T>& self) {
    pa->ensure_grad();
    for (int64_t i = 0; i < m; ++i)
      for (int64_t j = 0; j < n; ++j)
        pa->grad[(size_t)(i * n + j)] += self.grad[(size_t)(j * m + i)];
  });
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& a, const Shape& s) {
  contract_check(shape_numel(s) == a.numel(),
                 "reshape: element count mismatch " + shape_str(a.shape()) +
                     " -> " + shape_str(s));
  auto out = new_node<T>(s);
  out->data = a.vec();
  auto pa = a.node();
  return finish<T>(out, {pa}, [pa](TensorNode<T>& self) {
    pa->ensure_grad();
    kern::kernels<T>().axpy(T(1), self.grad.data(), pa->grad.data(),
                            (int64_t)self.data.size());
  });
}

template <typename T>
Tensor<T> slice_rows(const Tensor<T>& a, int64_t r0, int64_t r1) {
  const int64_t rows = rows_of(a);
  contract_check(0 <= r0 && r0 <= r1 && r1 <= rows,
                 "slice_rows: range out of bounds");
  const int64_t inner = a.numel() / (rows > 0 ? rows : 1);
  Shape s = a.shape();
  s[0] = r1 - r0;
  auto out = new_node<T>(s);
  std::copy(a.data() + r0 * inner, a.data() + r1 * inner, out->data.begin());
  auto pa = a.node();
  return finish<T>(out, {pa}, [pa, r0, inner](TensorNode<T>& self) {
    pa->ensure_grad();
    const int64_t n = (int64_t)self.data.size();
    kern::kernels<T>().axpy(T(1), self.grad.data(),
                            pa->grad.data() + r0 * inner, n);
  });
}

template <typename T>
Tensor<T> concat_rows(const std::vector<Tensor<T>>& parts) {
  contract_check(!parts.empty(), "concat_rows: no parts");
  Shape s = parts[0].shape();
  contract_check(!s.empty(), "concat_rows: rank must be >= 1");
  int64_t rows = 0;
  const int64_t inner = parts[0].numel() / (s[0] > 0 ? s[0] : 1);
  for (const auto& p : parts) {
    Shape ps = p.shape();
    contract_check(ps.size() == s.size(), "concat_rows: rank mismatch");
    for (size_t i = 1; i < s.size(); ++i)
      contract_check(ps[i] == s[i], "concat_rows: trailing dims differ");
    rows += ps[0];
  }
  s[0] = rows;
  auto out = new_node<T>(s);
  std::vector<NodePtr<T>> parents;
  int64_t off = 0;
  for (const auto& p : parts) {
    std::copy(p.data(), p.data() + p.numel(), out->data.begin() + off);
    off += p.numel();
    parents.push_back(p.node());
  }
  return finish<T>(out, parents, [parents, inner](TensorNode<T>& self) {
    (void)inner;
    int64_t off = 0;
    for (const auto& p : parents) {
      const int64_t n = (int64_t)p->data.size();
      if (p->requires_grad) {
        p->ensure_grad();
        kern::kernels<T>().axpy(T(1), self.grad.data() + off, p->grad.data(),
                                n);
      }
      off += n;
    }
  });
}

template <typename T>
Tensor<T> gather_rows(const Tensor<T>& a, const std::vector<int64_t>& idx) {
  const int64_t rows = rows_of(a);
  const int64_t inner = a.numel() / (rows > 0 ? rows : 1);
  Shape s = a.shape();
  s[0] = (int64_t)idx.size();
  auto out = new_node<T>(s);
  for (size_t r = 0; r < idx.size(); ++r) {
    contract_check(0 <= idx[r] && idx[r] < rows,
                   "gather_rows: index out of range");
    std::copy(a.data() + idx[r] * inner, a.data() + (idx[r] + 1) * inner,
              out->data.begin() + (int64_t)r * inner);
  }
  auto pa = a.node();
  return finish<T>(out, {pa}, [pa, idx, inner](TensorNode<T>& self) {
    pa->ensure_grad();
    for (size_t r = 0; r < idx.size(); ++r)
      kern::kernels<T>().axpy(T(1), self.grad.data() + (int64_t)r * inner,
                              pa->grad.data() + idx[r] * inner, inner);
  });
}

template <typename T>
Tensor<T> slice_cols(const Tensor<T>& a, int64_t c0, int64_t c1) {
  contract_check(a.rank() == 2, "slice_cols: rank must be 2");
  const int64_t m = a.dim(0), n = a.dim(1);
  contract_check(0 <= c0 && c0 <= c1 && c1 <= n,
                 "slice_cols: range out of bounds");
  const int64_t w = c1 - c0;
  auto out = new_node<T>({m, w});
  for (int64_t i = 0; i < m; ++i)
    std::copy(a.data() + i * n + c0, a.data() + i * n + c1,
              out->data.begin() + i * w);
  auto pa = a.node();
  return finish<T>(out, {pa}, [pa, c0, w, n, m](TensorNode<T>& self) {
    pa->ensure_grad();
    for (int64_t i = 0; i < m; ++i)
      for (int64_t j = 0; j < w; ++j)
        pa->grad[(size_t)(i * n + c0 + j)] += self.grad[(size_t)(i * w + j)];
  });
}

template <typename T>
Tensor<T> concat_cols(const std::vector<Tensor<T>>& parts) {
  contract_check(!parts.empty(), "concat_cols: no parts");
  const int64_t m = parts[0].dim(0);
  int64_t n = 0;
  for (const auto& p : parts) {
    contract_check(p.rank() == 2 && p.dim(0) == m,
                   "concat_cols: row count mismatch");
    n += p.dim(1);
  }
  auto out = new_node<T>({m, n});
  std::vector<NodePtr<T>> parents;
  std::vector<int64_t> widths;
  int64_t off = 0;
  for (const auto& p : parts) {
    const int64_t w = p.dim(1);
    for (int64_t i = 0; i < m; ++i)
      std::copy(p.data() + i * w, p.data() + (i + 1) * w,
                out->data.begin() + i * n + off);
    off += w;
    parents.push_back(p.node());
    widths.push_back(w);
  }
  return finish<T>(out, parents, [parents, widths, m, n](TensorNode<T>& self) {
    int64_t off = 0;
    for (size_t pi = 0; pi < parents.size(); ++pi) {
      const auto& p = parents[pi];
      const int64_t w = widths[pi];
      if (p->requires_grad) {
        p->ensure_grad();
        for (int64_t i = 0; i < m; ++i)
          for (int64_t j = 0; j < w; ++j)
            p->grad[(size_t)(i * w + j)] +=
                self.grad[(size_t)(i * n + off + j)];
      }
      off += w;
    }
  });
}

template <typename T>
Tensor<T> sum_all(const Tensor<T>& a) {
  auto out = new_node<T>({1});
  T s = T(0);
  for (int64_t i = 0; i < a.numel(); ++i) s += a.data()[i];
  out->data[0] = s;
  auto pa = a.node();
  return finish<T>(out, {pa}, [pa](TensorNode<T>& self) {
    pa->ensure_grad();
    const T g = self.grad[0];
    for (size_t i = 0; i < pa->data.size(); ++i) pa->grad[i] += g;
  });
}

template <typename T>
Tensor<T> mean_all(const Tensor<T>& a) {
  contract_check(a.numel() > 0, "mean_all: empty tensor");
  return mul_const(sum_all(a), 1.0 / (double)a.numel());
}

template <typename T>
Tensor<T> sum_lastdim(const Tensor<T>& a) {
  contract_check(a.rank() >= 1, "sum_lastdim: rank must be >= 1");
  const int64_t k = a.dim(a.rank() - 1);
  const int64_t rows = a.numel() / (k > 0 ? k : 1);
  Shape s = a.shape();
  s.back() = 1;
  auto out = new_node<T>(s);
  for (int64_t r = 0; r < rows; ++r) {
    T acc = T(0);
    for (int64_t j = 0; j < k; ++j) acc += a.data()[r * k + j];
    out->data[(size_t)r] = acc;
  }
  auto pa = a.node();
  return finish<T>(out, {pa}, [pa, rows, k](TensorNode<T>& self) {
    pa->ensure_grad();
    for (int64_t r = 0; r < rows; ++r) {
      const T g = self.grad[(size_t)r];
      for (int64_t j = 0; j < k; ++j) pa->grad[(size_t)(r * k + j)] += g;
    }
  });
}

template <typename T>
Tensor<T> expand_lastdim(const Tensor<T>& a, int64_t k) {
  contract_check(a.rank() >= 1 && a.dim(a.rank() - 1) == 1,
                 "expand_lastdim: last dim must be 1");
  contract_check(k >= 1, "expand_lastdim: k must be >= 1");
  const int64_t rows = a.numel();
  Shape s = a.shape();
  s.back() = k;
  auto out = new_node<T>(s);
  for (int64_t r = 0; r < rows; ++r) {
    const T v = a.data()[r];
    for (int64_t j = 0; j < k; ++j) out->data[(size_t)(r * k + j)] = v;
  }
  auto pa = a.node();
  return finish<T>(out, {pa}, [pa, rows, k](TensorNode<T>& self) {
    pa->ensure_grad();
    for (int64_t r = 0; r < rows; ++r) {
      T acc = T(0);
      for (int64_t j = 0; j < k; ++j) acc += self.grad[(size_t)(r * k + j)];
      pa->grad[(size_t)r] += acc;
    }
  });
}

template <typename T>
Tensor<T> mul_rowvec(const Tensor<T>& x, const Tensor<T>& v) {
  contract_check(x.rank() >= 1 && v.rank() == 1,
                 "mul_rowvec: x rank >= 1, v rank 1");
  const int64_t k = x.dim(x.rank() - 1);
  contract_check(v.dim(0) == k, "mul_rowvec: width mismatch");
  const int64_t rows = x.numel() / (k > 0 ? k : 1);
  auto out = new_node<T>(x.shape());
  for (int64_t r = 0; r < rows; ++r)
    for (int64_t j = 0; j < k; ++j)
      out->data[(size_t)(r * k + j)] = x.data()[r * k + j] * v.data()[j];
  auto px = x.node(), pv = v.node();
  return finish<T>(out, {px, pv}, [px, pv, rows, k](TensorNode<T>& self) {
    if (px->requires_grad) {
      px->ensure_grad();
      for (int64_t r = 0; r < rows; ++r)
        for (int64_t j = 0; j < k; ++j)
          px->grad[(size_t)(r * k + j)] +=
              self.grad[(size_t)(r * k + j)] * pv->data[(size_t)j];
    }
    if (pv->requires_grad) {
      pv->ensure_grad();
      for (int64_t r = 0; r < rows; ++r)
        for (int64_t j = 0; j < k; ++j)
          pv->grad[(size_t)j] +=
              self.grad[(size_t)(r * k + j)] * px->data[(size_t)(r * k + j)];
    }
  });
}

template <typename T>
Tensor<T> add_rowvec(const Tensor<T>& x, const Tensor<T>& v) {
  contract_check(x.rank() >= 1 && v.rank() == 1,
                 "add_rowvec: x rank >= 1, v rank 1");
  const int64_t k = x.dim(x.rank() - 1);
  contract_check(v.dim(0) == k, "add_rowvec: width mismatch");
  const int64_t rows = x.numel() / (k > 0 ? k : 1);
  auto out = new_node<T>(x.shape());
  for (int64_t r = 0; r < rows; ++r)
    for (int64_t j = 0; j < k; ++j)
      out->data[(size_t)(r * k + j)] = x.data()[r * k + j] + v.data()[j];
  auto px = x.node(), pv = v.node();
  return finish<T>(out, {px, pv}, [px, pv, rows, k](TensorNode<T>& self) {
    if (px->requires_grad) {
      px->ensure_grad();
      kern::kernels<T>().axpy(T(1), self.grad.data(), px->grad.data(),
                              rows * k);
    }
    if (pv->requires_grad) {
      pv->ensure_grad();
      for (int64_t r = 0; r < rows; ++r)
        for (int64_t j = 0; j < k; ++j)
          pv->grad[(size_t)j] += self.grad[(size_t)(r * k + j)];
    }
  });
}

template <typename T>
Tensor<T> softmax_lastdim(const Tensor<T>& a) {
  contract_check(a.rank() >= 1, "softmax_lastdim: rank must be >= 1");
  const int64_t k = a.dim(a.rank() - 1);
  contract_check(k >= 1, "softmax_lastdim: empty last dim");
  const int64_t rows = a.numel() / k;
  auto out = new_node<T>(a.shape());
  constexpr T kNegInf = -std::numeric_limits<T>::infinity();
  for (int64_t r = 0; r < rows; ++r) {
    const T* x = a.data() + r * k;
    T* y = out->data.data() + r * k;
    T mx = kNegInf;
    for (int64_t j = 0; j < k; ++j) mx = std::max(mx, x[j]);
    if (mx == kNegInf) {
      // A fully masked row attends to nothing.
      for (int64_t j = 0; j < k; ++j) y[j] = T(0);
      continue;
    }
    T denom = T(0);
    for (int64_t j = 0; j < k; ++j) {
      const T e = x[j] == kNegInf ? T(0) : T(std::exp((double)(x[j] - mx)));
      y[j] = e;
      denom += e;
    }
    for (int64_t j = 0; j < k; ++j) y[j] /= denom;
  }
  auto pa = a.node();
  return finish<T>(out, {pa}, [pa, rows, k](TensorNode<T>& self) {
    pa->ensure_grad();
    for (int64_t r = 0; r < rows; ++r) {
      const T* y = self.data.data() + r * k;
      const T* g = self.grad.data() + r * k;
      T dot = T(0);
      for (int64_t j = 0; j < k; ++j) dot += y[j] * g[j];
      for (int64_t j = 0; j < k; ++j)
        pa->grad[(size_t)(r * k + j)] += y[j] * (g[j] - dot);
    }
  });
}

template <typename T>
Tensor<T> mul_scalar_t(const Tensor<T>& x, const Tensor<T>& s) {
  contract_check(s.numel() == 1, "mul_scalar_t: s must be a scalar tensor");
  auto out = new_node<T>(x.shape());
  kern::kernels<T>().scale(s.data()[0], x.data(), out->data.data(), x.numel());
  auto px = x.node(), ps = s.node();
  return finish<T>(out, {px, ps}, [px, ps](TensorNode<T>& self) {
    const int64_t n = (int64_t)self.data.size();
    if (px->requires_grad) {
      px->ensure_grad();
      kern::kernels<T>().axpy(ps->data[0], self.grad.data(), px->grad.data(),
                              n);
    }
    if (ps->requires_grad) {
      ps->ensure_grad();
      T acc = T(0);
      for (int64_t i = 0; i < n; ++i)
        acc += self.grad[(size_t)i] * px->data[(size_t)i];
      ps->grad[0] += acc;
    }
  });
}

template <typename T>
Tensor<T> div_scalar_t(const Tensor<T>& x, const Tensor<T>& s) {
  contract_check(s.numel() == 1, "div_scalar_t: s must be a scalar tensor");
  auto out = new_node<T>(x.shape());
  const T sv = s.data()[0];
  for (int64_t i = 0; i < x.numel(); ++i)
    out->data[(size_t)i] = x.data()[i] / sv;
  auto px = x.node(), ps = s.node();
  return finish<T>(out, {px, ps}, [px, ps](TensorNode<T>& self) {
    const int64_t n = (int64_t)self.data.size();
    const T sv = ps->data[0];
    if (px->requires_grad) {
      px->ensure_grad();
      kern::kernels<T>().axpy(T(1) / sv, self.grad.data(), px->grad.data(),
                              n);
    }
    if (ps->requires_grad) {
      ps->ensure_grad();
      T acc = T(0);
      for (int64_t i = 0; i < n; ++i)
        acc += self.grad[(size_t)i] * self.data[(size_t)i];
      ps->grad[0] -= acc / sv;
    }
  });
}

template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
  return add_rowvec(matmul(x, w), b);
}

#define GART_INSTANTIATE_OPS(T)                                               \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                 \
  template Tensor<T> sub(const Tensor<T>&, const Tensor<T>&);                 \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                 \
  template Tensor<T> div(const Tensor<T>&, const Tensor<T>&);                 \
  template Tensor<T> neg(const Tensor<T>&);                                   \
  template Tensor<T> add_const(const Tensor<T>&, double);                     \
  template Tensor<T> mul_const(const Tensor<T>&, double);                     \
  template Tensor<T> exp_t(const Tensor<T>&);                                 \
  template Tensor<T> log_t(const Tensor<T>&);                                 \
  template Tensor<T> sqrt_t(const Tensor<T>&);                                \
  template Tensor<T> abs_t(const Tensor<T>&);                                 \
  template Tensor<T> gelu(const Tensor<T>&);                                  \
  template Tensor<T> clamp_min(const Tensor<T>&, double);                     \
  template Tensor<T> acos_clamped(const Tensor<T>&);                          \
  template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&);              \
  template Tensor<T> transpose2d(const Tensor<T>&);                           \
  template Tensor<T> reshape(const Tensor<T>&, const Shape&);                 \
  template Tensor<T> slice_rows(const Tensor<T>&, int64_t, int64_t);          \
  template Tensor<T> concat_rows(const std::vector<Tensor<T>>&);              \
  template Tensor<T> gather_rows(const Tensor<T>&,                            \
                                 const std::vector<int64_t>&);                \
  template Tensor<T> slice_cols(const Tensor<T>&, int64_t, int64_t);          \
  template Tensor<T> concat_cols(const std::vector<Tensor<T>>&);              \
  template Tensor<T> sum_all(const Tensor<T>&);                               \
  template Tensor<T> mean_all(const Tensor<T>&);                              \
  template Tensor<T> sum_lastdim(const Tensor<T>&);                           \
  template Tensor<T> expand_lastdim(const Tensor<T>&, int64_t);               \
  template Tensor<T> mul_rowvec(const Tensor<T>&, const Tensor<T>&);          \
  template Tensor<T> add_rowvec(const Tensor<T>&, const Tensor<T>&);          \
  template Tensor<T> softmax_lastdim(const Tensor<T>&);                       \
  template Tensor<T> mul_scalar_t(const Tensor<T>&, const Tensor<T>&);        \
  template Tensor<T> div_scalar_t(const Tensor<T>&, const Tensor<T>&);        \
  template Tensor<T> linear(const Tensor<T>&, const Tensor<T>&,               \
                            const Tensor<T>&);

GART_INSTANTIATE_OPS(float)
GART_INSTANTIATE_OPS(double)

#undef GART_INSTANTIATE_OPS

}  // namespace gart
