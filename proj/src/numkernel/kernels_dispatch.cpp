#include "gart/error.hpp"
#include "gart/kernels.hpp"

namespace gart::kern {

template <typename T>
const KernelTable<T>& scalar_table();

#if defined(__x86_64__) || defined(_M_X64)
template <typename T>
const KernelTable<T>& avx2_table();
#endif

const char* backend_name(Backend b) {
  switch (b) {
    case Backend::kScalar:
      return "scalar";
    case Backend::kAvx2:
      return "avx2";
  }
  return "unknown";
}

bool avx2_supported() {
#if defined(__x86_64__) || defined(_M_X64)
  return __builtin_cpu_supports("avx2") != 0;
#else
  return false;
#endif
}

namespace {
Backend g_backend = avx2_supported() ? Backend::kAvx2 : Backend::kScalar;
}

Backend active_backend() { return g_backend; }

void set_backend(Backend b) {
  if (b == Backend::kAvx2 && !avx2_supported())
    contract_fail("set_backend: avx2 not supported on this host");
  g_backend = b;
}

template <typename T>
const KernelTable<T>& kernels(Backend b) {
#if defined(__x86_64__) || defined(_M_X64)
  if (b == Backend::kAvx2) return avx2_table<T>();
#else
  (void)b;
#endif
  return scalar_table<T>();
}

template <typename T>
const KernelTable<T>& kernels() {
  return kernels<T>(g_backend);
}

template const KernelTable<float>& kernels<float>(Backend);
template const KernelTable<double>& kernels<double>(Backend);
template const KernelTable<float>& kernels<float>();
template const KernelTable<double>& kernels<double>();

}  // namespace gart::kern
