#include "gart/gten.hpp"

#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "gart/rng.hpp"

namespace gart {
namespace {

namespace fs = std::filesystem;

fs::path temp_file(const char* name) {
  return fs::temp_directory_path() / name;
}

TEST(Gten, RoundTripF64) {
  Rng rng(1);
  std::vector<double> v(24);
  for (auto& x : v) x = rng.gaussian();
  v[3] = std::numeric_limits<double>::quiet_NaN();
  v[7] = -std::numeric_limits<double>::infinity();
  v[11] = -0.0;
  auto t = Tensor64::from_data({2, 3, 4}, v);
  std::stringstream ss;
  save_gten(ss, t);
  auto u = load_gten<double>(ss);
  ASSERT_EQ(u.shape(), t.shape());
  for (size_t i = 0; i < v.size(); ++i) {
    // Bit-exact comparison, NaN payloads included.
    EXPECT_EQ(std::bit_cast<uint64_t>(u.vec()[i]),
              std::bit_cast<uint64_t>(v[i]));
  }
}

TEST(Gten, RoundTripF32File) {
  Rng rng(2);
  std::vector<float> v(10);
  for (auto& x : v) x = (float)rng.gaussian();
  auto t = Tensor32::from_data({10}, v);
  const auto path = temp_file("gart_gten_f32.gten");
  save_gten(path.string(), t);
  auto u = load_gten<float>(path.string());
  EXPECT_EQ(u.vec(), v);
  fs::remove(path);
}

TEST(Gten, DtypeMismatchIsFormatError) {
  auto t = Tensor64::from_data({2}, {1.0, 2.0});
  std::stringstream ss;
  save_gten(ss, t);
  EXPECT_THROW(load_gten<float>(ss), FormatError);
}

TEST(Gten, BadMagicIsFormatError) {
  std::stringstream ss;
  ss << "NOPE";
  EXPECT_THROW(load_gten<double>(ss), FormatError);
}

TEST(Gten, TruncatedPayloadIsFormatError) {
  auto t = Tensor64::from_data({4}, {1, 2, 3, 4});
  std::stringstream ss;
  save_gten(ss, t);
  std::string bytes = ss.str();
  bytes.resize(bytes.size() - 9);
  std::stringstream cut(bytes);
  EXPECT_THROW(load_gten<double>(cut), FormatError);
}

TEST(Gten, FutureVersionIsFormatError) {
  auto t = Tensor64::from_data({1}, {1.0});
  std::stringstream ss;
  save_gten(ss, t);
  std::string bytes = ss.str();
  bytes[4] = 99;  // version byte (little-endian u32 after magic)
  std::stringstream bad(bytes);
  EXPECT_THROW(load_gten<double>(bad), FormatError);
}

TEST(Gten, HeaderLayoutIsStable) {
  auto t = Tensor64::from_data({2, 1}, {1.0, 2.0});
  std::stringstream ss;
  save_gten(ss, t);
  const std::string b = ss.str();
  ASSERT_GE(b.size(), 4u + 4 + 4 + 16 + 4 + 16);
  EXPECT_EQ(b.substr(0, 4), "GTEN");
  EXPECT_EQ((unsigned char)b[4], 1);   // version 1
  EXPECT_EQ((unsigned char)b[8], 2);   // rank 2
  EXPECT_EQ((unsigned char)b[12], 2);  // extent[0] = 2
  EXPECT_EQ((unsigned char)b[20], 1);  // extent[1] = 1
  EXPECT_EQ((unsigned char)b[28], 2);  // dtype tag f64
}

}  // namespace
}  // namespace gart
