#pragma once

#include <cstdint>
#include <string>

namespace gart::kern {

// Dense inner-loop kernels behind the tensor ops. Every entry has a scalar
// reference implementation and, on x86 hosts with AVX2, a vectorized variant.
// The two variants are required to be bit-identical: the SIMD code vectorizes
// only across independent output elements and performs the same multiply/add
// sequence per element (no FMA, no reduction reordering), and the build keeps
// -ffp-contract=off so the scalar loops cannot be contracted either.
template <typename T>
struct KernelTable {
  // c = a * b, row-major [m x k] * [k x n].
  void (*mm_nn)(const T* a, const T* b, T* c, int64_t m, int64_t k, int64_t n);
  // c += a * b.
  void (*mm_nn_acc)(const T* a, const T* b, T* c, int64_t m, int64_t k,
                    int64_t n);
  void (*ew_add)(const T* a, const T* b, T* c, int64_t n);
  void (*ew_sub)(const T* a, const T* b, T* c, int64_t n);
  void (*ew_mul)(const T* a, const T* b, T* c, int64_t n);
  // y += alpha * x.
  void (*axpy)(T alpha, const T* x, T* y, int64_t n);
  // y = alpha * x.
  void (*scale)(T alpha, const T* x, T* y, int64_t n);
};

enum class Backend { kScalar, kAvx2 };

const char* backend_name(Backend b);

// True when this process can execute the AVX2 variants.
bool avx2_supported();

// Active backend. Defaults to the widest supported one; tests and the CLI may
// pin it. Selecting an unsupported backend throws ContractError.
Backend active_backend();
void set_backend(Backend b);

template <typename T>
const KernelTable<T>& kernels(Backend b);

template <typename T>
const KernelTable<T>& kernels();  // table for active_backend()

extern template const KernelTable<float>& kernels<float>(Backend);
extern template const KernelTable<double>& kernels<double>(Backend);
extern template const KernelTable<float>& kernels<float>();
extern template const KernelTable<double>& kernels<double>();

}  // namespace gart::kern
