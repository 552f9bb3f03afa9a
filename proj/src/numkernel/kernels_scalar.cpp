#include "gart/kernels.hpp"

namespace gart::kern {
namespace scalar {

// Accumulation over k runs in ascending order with one multiply and one add
// per step; the SIMD variants replicate exactly this sequence per output.
template <typename T>
void mm_nn(const T* a, const T* b, T* c, int64_t m, int64_t k, int64_t n) {
  for (int64_t i = 0; i < m; ++i) {
    T* crow = c + i * n;
    for (int64_t j = 0; j < n; ++j) crow[j] = T(0);
    for (int64_t p = 0; p < k; ++p) {
      const T av = a[i * k + p];
      const T* brow = b + p * n;
      for (int64_t j = 0; j < n; ++j) crow[j] = crow[j] + av * brow[j];
    }
  }
}

template <typename T>
void mm_nn_acc(const T* a, const T* b, T* c, int64_t m, int64_t k, int64_t n) {
  for (int64_t i = 0; i < m; ++i) {
    T* crow = c + i * n;
    for (int64_t p = 0; p < k; ++p) {
      const T av = a[i * k + p];
      const T* brow = b + p * n;
      for (int64_t j = 0; j < n; ++j) crow[j] = crow[j] + av * brow[j];
    }
  }
}

template <typename T>
void ew_add(const T* a, const T* b, T* c, int64_t n) {
  for (int64_t i = 0; i < n; ++i) c[i] = a[i] + b[i];
}

template <typename T>
void ew_sub(const T* a, const T* b, T* c, int64_t n) {
  for (int64_t i = 0; i < n; ++i) c[i] = a[i] - b[i];
}

template <typename T>
void ew_mul(const T* a, const T* b, T* c, int64_t n) {
  for (int64_t i = 0; i < n; ++i) c[i] = a[i] * b[i];
}

template <typename T>
void axpy(T alpha, const T* x, T* y, int64_t n) {
  for (int64_t i = 0; i < n; ++i) y[i] = y[i] + alpha * x[i];
}

template <typename T>
void scale(T alpha, const T* x, T* y, int64_t n) {
  for (int64_t i = 0; i < n; ++i) y[i] = alpha * x[i];
}

}  // namespace scalar

template <typename T>
const KernelTable<T>& scalar_table() {
  static const KernelTable<T> table = {
      &scalar::mm_nn<T>, &scalar::mm_nn_acc<T>, &scalar::ew_add<T>,
      &scalar::ew_sub<T>, &scalar::ew_mul<T>,   &scalar::axpy<T>,
      &scalar::scale<T>,
  };
  return table;
}

template const KernelTable<float>& scalar_table<float>();
template const KernelTable<double>& scalar_table<double>();

}  // namespace gart::kern
