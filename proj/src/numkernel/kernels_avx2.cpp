#include "gart/kernels.hpp"

#if defined(__x86_64__) || defined(_M_X64)
#include <immintrin.h>

namespace gart::kern {
namespace avx2 {

// Lanes map to independent output elements and each lane performs the same
// multiply-then-add sequence as the scalar kernel, so results are
// bit-identical. FMA intrinsics are deliberately not used: they would fuse
// the rounding step that the scalar code performs twice.

inline __m256d mul_add_pd(__m256d acc, __m256d a, __m256d b) {
  return _mm256_add_pd(acc, _mm256_mul_pd(a, b));
}

inline __m256 mul_add_ps(__m256 acc, __m256 a, __m256 b) {
  return _mm256_add_ps(acc, _mm256_mul_ps(a, b));
}

void mm_nn_acc_d(const double* a, const double* b, double* c, int64_t m,
                 int64_t k, int64_t n) {
  const int64_t nv = n - (n % 4);
  for (int64_t i = 0; i < m; ++i) {
    double* crow = c + i * n;
    for (int64_t p = 0; p < k; ++p) {
      const double av = a[i * k + p];
      const __m256d avv = _mm256_set1_pd(av);
      const double* brow = b + p * n;
      int64_t j = 0;
      for (; j < nv; j += 4) {
        __m256d cv = _mm256_loadu_pd(crow + j);
        cv = mul_add_pd(cv, avv, _mm256_loadu_pd(brow + j));
        _mm256_storeu_pd(crow + j, cv);
      }
      for (; j < n; ++j) crow[j] = crow[j] + av * brow[j];
    }
  }
}

void mm_nn_d(const double* a, const double* b, double* c, int64_t m, int64_t k,
             int64_t n) {
  for (int64_t i = 0; i < m; ++i) {
    double* crow = c + i * n;
    for (int64_t j = 0; j < n; ++j) crow[j] = 0.0;
  }
  mm_nn_acc_d(a, b, c, m, k, n);
}

void mm_nn_acc_s(const float* a, const float* b, float* c, int64_t m,
                 int64_t k, int64_t n) {
  const int64_t nv = n - (n % 8);
  for (int64_t i = 0; i < m; ++i) {
    float* crow = c + i * n;
    for (int64_t p = 0; p < k; ++p) {
      const float av = a[i * k + p];
      const __m256 avv = _mm256_set1_ps(av);
      const float* brow = b + p * n;
      int64_t j = 0;
      for (; j < nv; j += 8) {
        __m256 cv = _mm256_loadu_ps(crow + j);
        cv = mul_add_ps(cv, avv, _mm256_loadu_ps(brow + j));
        _mm256_storeu_ps(crow + j, cv);
      }
      for (; j < n; ++j) crow[j] = crow[j] + av * brow[j];
    }
  }
}

void mm_nn_s(const float* a, const float* b, float* c, int64_t m, int64_t k,
             int64_t n) {
  for (int64_t i = 0; i < m; ++i) {
    float* crow = c + i * n;
    for (int64_t j = 0; j < n; ++j) crow[j] = 0.0f;
  }
  mm_nn_acc_s(a, b, c, m, k, n);
}

void ew_add_d(const double* a, const double* b, double* c, int64_t n) {
  int64_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(c + i, _mm256_add_pd(_mm256_loadu_pd(a + i),
                                          _mm256_loadu_pd(b + i)));
  for (; i < n; ++i) c[i] = a[i] + b[i];
}

void ew_sub_d(const double* a, const double* b, double* c, int64_t n) {
  int64_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(c + i, _mm256_sub_pd(_mm256_loadu_pd(a + i),
                                          _mm256_loadu_pd(b + i)));
  for (; i < n; ++i) c[i] = a[i] - b[i];
}

void ew_mul_d(const double* a, const double* b, double* c, int64_t n) {
  int64_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(c + i, _mm256_mul_pd(_mm256_loadu_pd(a + i),
                                          _mm256_loadu_pd(b + i)));
  for (; i < n; ++i) c[i] = a[i] * b[i];
}

void axpy_d(double alpha, const double* x, double* y, int64_t n) {
  const __m256d av = _mm256_set1_pd(alpha);
  int64_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d yv = _mm256_loadu_pd(y + i);
    yv = mul_add_pd(yv, av, _mm256_loadu_pd(x + i));
    _mm256_storeu_pd(y + i, yv);
  }
  for (; i < n; ++i) y[i] = y[i] + alpha * x[i];
}

void scale_d(double alpha, const double* x, double* y, int64_t n) {
  const __m256d av = _mm256_set1_pd(alpha);
  int64_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(y + i, _mm256_mul_pd(av, _mm256_loadu_pd(x + i)));
  for (; i < n; ++i) y[i] = alpha * x[i];
}

void ew_add_s(const float* a, const float* b, float* c, int64_t n) {
  int64_t i = 0;
  for (; i + 8 <= n; i += 8)
    _mm256_storeu_ps(c + i, _mm256_add_ps(_mm256_loadu_ps(a + i),
                                          _mm256_loadu_ps(b + i)));
  for (; i < n; ++i) c[i] = a[i] + b[i];
}

void ew_sub_s(const float* a, const float* b, float* c, int64_t n) {
  int64_t i = 0;
  for (; i + 8 <= n; i += 8)
    _mm256_storeu_ps(c + i, _mm256_sub_ps(_mm256_loadu_ps(a + i),
                                          _mm256_loadu_ps(b + i)));
  for (; i < n; ++i) c[i] = a[i] - b[i];
}

void ew_mul_s(const float* a, const float* b, float* c, int64_t n) {
  int64_t i = 0;
  for (; i + 8 <= n; i += 8)
    _mm256_storeu_ps(c + i, _mm256_mul_ps(_mm256_loadu_ps(a + i),
                                          _mm256_loadu_ps(b + i)));
  for (; i < n; ++i) c[i] = a[i] * b[i];
}

void axpy_s(float alpha, const float* x, float* y, int64_t n) {
  const __m256 av = _mm256_set1_ps(alpha);
  int64_t i = 0;
  for (; i + 8 <= n; i += 8) {
    __m256 yv = _mm256_loadu_ps(y + i);
    yv = mul_add_ps(yv, av, _mm256_loadu_ps(x + i));
    _mm256_storeu_ps(y + i, yv);
  }
  for (; i < n; ++i) y[i] = y[i] + alpha * x[i];
}

void scale_s(float alpha, const float* x, float* y, int64_t n) {
  const __m256 av = _mm256_set1_ps(alpha);
  int64_t i = 0;
  for (; i + 8 <= n; i += 8)
    _mm256_storeu_ps(y + i, _mm256_mul_ps(av, _mm256_loadu_ps(x + i)));
  for (; i < n; ++i) y[i] = alpha * x[i];
}

}  // namespace avx2

template <typename T>
const KernelTable<T>& avx2_table();

template <>
const KernelTable<double>& avx2_table<double>() {
  static const KernelTable<double> table = {
      &avx2::mm_nn_d, &avx2::mm_nn_acc_d, &avx2::ew_add_d, &avx2::ew_sub_d,
      &avx2::ew_mul_d, &avx2::axpy_d,     &avx2::scale_d,
  };
  return table;
}

template <>
const KernelTable<float>& avx2_table<float>() {
  static const KernelTable<float> table = {
      &avx2::mm_nn_s, &avx2::mm_nn_acc_s, &avx2::ew_add_s, &avx2::ew_sub_s,
      &avx2::ew_mul_s, &avx2::axpy_s,     &avx2::scale_s,
  };
  return table;
}

}  // namespace gart::kern

#endif  // x86_64
