#include "gart/gten.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "gart/error.hpp"

namespace gart {

namespace wire {

void write_u32(std::ostream& os, uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = (unsigned char)((v >> (8 * i)) & 0xff);
  os.write((const char*)b, 4);
}

void write_u64(std::ostream& os, uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = (unsigned char)((v >> (8 * i)) & 0xff);
  os.write((const char*)b, 8);
}

void write_f64(std::ostream& os, double v) {
  write_u64(os, std::bit_cast<uint64_t>(v));
}

void write_magic(std::ostream& os, const char magic[4]) {
  os.write(magic, 4);
}

uint32_t read_u32(std::istream& is, const char* what) {
  unsigned char b[4];
  if (!is.read((char*)b, 4))
    throw FormatError(std::string("truncated file while reading ") + what);
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= (uint32_t)b[i] << (8 * i);
  return v;
}

uint64_t read_u64(std::istream& is, const char* what) {
  unsigned char b[8];
  if (!is.read((char*)b, 8))
    throw FormatError(std::string("truncated file while reading ") + what);
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= (uint64_t)b[i] << (8 * i);
  return v;
}

double read_f64(std::istream& is, const char* what) {
  return std::bit_cast<double>(read_u64(is, what));
}

void read_magic(std::istream& is, const char magic[4], const char* what) {
  char b[4];
  if (!is.read(b, 4))
    throw FormatError(std::string("truncated file while reading ") + what);
  if (std::memcmp(b, magic, 4) != 0)
    throw FormatError(std::string("bad magic for ") + what);
}

}  // namespace wire

template <typename T>
void save_gten(std::ostream& os, const Tensor<T>& t) {
  contract_check(t.defined(), "save_gten: undefined tensor");
  wire::write_magic(os, "GTEN");
  wire::write_u32(os, kGtenVersion);
  wire::write_u32(os, (uint32_t)t.rank());
  for (int64_t i = 0; i < t.rank(); ++i)
    wire::write_u64(os, (uint64_t)t.dim(i));
  wire::write_u32(os, dtype_tag<T>());
  if constexpr (sizeof(T) == 4) {
    for (int64_t i = 0; i < t.numel(); ++i) {
      uint32_t bits = std::bit_cast<uint32_t>(t.data()[i]);
      wire::write_u32(os, bits);
    }
  } else {
    for (int64_t i = 0; i < t.numel(); ++i)
      wire::write_u64(os, std::bit_cast<uint64_t>(t.data()[i]));
  }
}

template <typename T>
void save_gten(const std::string& path, const Tensor<T>& t) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("save_gten: cannot open " + path);
  save_gten(os, t);
  if (!os) throw FormatError("save_gten: write failed for " + path);
}

template <typename T>
Tensor<T> load_gten(std::istream& is) {
  wire::read_magic(is, "GTEN", "tensor header");
  const uint32_t version = wire::read_u32(is, "tensor version");
  if (version != kGtenVersion)
    throw FormatError("unsupported tensor version " + std::to_string(version));
  const uint32_t rank = wire::read_u32(is, "tensor rank");
  if (rank > 8) throw FormatError("implausible tensor rank");
  Shape shape;
  int64_t numel = 1;
  for (uint32_t i = 0; i < rank; ++i) {
    const uint64_t d = wire::read_u64(is, "tensor extent");
    if (d > (1ull << 40)) throw FormatError("implausible tensor extent");
    shape.push_back((int64_t)d);
    numel *= (int64_t)d;
  }
  const uint32_t dtype = wire::read_u32(is, "tensor dtype");
  if (dtype != dtype_tag<T>())
    throw FormatError("tensor dtype mismatch: file has tag " +
                      std::to_string(dtype) + ", caller expects " +
                      std::to_string(dtype_tag<T>()));
  std::vector<T> data((size_t)numel);
  if constexpr (sizeof(T) == 4) {
    for (int64_t i = 0; i < numel; ++i)
      data[(size_t)i] = std::bit_cast<float>(wire::read_u32(is, "payload"));
  } else {
    for (int64_t i = 0; i < numel; ++i)
      data[(size_t)i] = std::bit_cast<double>(wire::read_u64(is, "payload"));
  }
  return Tensor<T>::from_data(shape, std::move(data));
}

template <typename T>
Tensor<T> load_gten(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("load_gten: cannot open " + path);
  return load_gten<T>(is);
}

template void save_gten<float>(std::ostream&, const Tensor<float>&);
template void save_gten<double>(std::ostream&, const Tensor<double>&);
template void save_gten<float>(const std::string&, const Tensor<float>&);
template void save_gten<double>(const std::string&, const Tensor<double>&);
template Tensor<float> load_gten<float>(std::istream&);
template Tensor<double> load_gten<double>(std::istream&);
template Tensor<float> load_gten<float>(const std::string&);
template Tensor<double> load_gten<double>(const std::string&);

}  // namespace gart
