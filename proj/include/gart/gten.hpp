#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>

#include "gart/tensor.hpp"

namespace gart {

// Little-endian primitives shared by every on-disk format in the project.
namespace wire {
void write_u32(std::ostream& os, uint32_t v);
void write_u64(std::ostream& os, uint64_t v);
void write_f64(std::ostream& os, double v);
void write_magic(std::ostream& os, const char magic[4]);
uint32_t read_u32(std::istream& is, const char* what);
uint64_t read_u64(std::istream& is, const char* what);
double read_f64(std::istream& is, const char* what);
void read_magic(std::istream& is, const char magic[4], const char* what);
}  // namespace wire

inline constexpr uint32_t kGtenVersion = 1;
inline constexpr uint32_t kDtypeF32 = 1;
inline constexpr uint32_t kDtypeF64 = 2;

template <typename T>
constexpr uint32_t dtype_tag() {
  return sizeof(T) == 4 ? kDtypeF32 : kDtypeF64;
}

// Layout: "GTEN" | u32 version | u32 rank | u64 extents[rank] | u32 dtype |
// payload (little-endian, element by element). Payload round-trips exactly,
// NaN bit patterns included.
template <typename T>
void save_gten(std::ostream& os, const Tensor<T>& t);
template <typename T>
void save_gten(const std::string& path, const Tensor<T>& t);
template <typename T>
Tensor<T> load_gten(std::istream& is);
template <typename T>
Tensor<T> load_gten(const std::string& path);

extern template void save_gten<float>(std::ostream&, const Tensor<float>&);
extern template void save_gten<double>(std::ostream&, const Tensor<double>&);
extern template void save_gten<float>(const std::string&, const Tensor<float>&);
extern template void save_gten<double>(const std::string&, const Tensor<double>&);
extern template Tensor<float> load_gten<float>(std::istream&);
extern template Tensor<double> load_gten<double>(std::istream&);
extern template Tensor<float> load_gten<float>(const std::string&);
extern template Tensor<double> load_gten<double>(const std::string&);

}  // namespace gart
