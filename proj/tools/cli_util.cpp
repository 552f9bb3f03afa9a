#include "cli_util.hpp"

#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "gart/error.hpp"
#include "gart/gten.hpp"
#include "gart/tensor.hpp"

namespace fs = std::filesystem;

namespace gart::cli {

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void EffectiveConfig::add(const std::string& key, const std::string& value) {
  entries_.emplace_back(key, value);
}
void EffectiveConfig::add(const std::string& key, int64_t value) {
  entries_.emplace_back(key, std::to_string(value));
}
void EffectiveConfig::add(const std::string& key, uint64_t value) {
  entries_.emplace_back(key, std::to_string(value));
}
void EffectiveConfig::add(const std::string& key, double value) {
  entries_.emplace_back(key, fmt_double(value));
}
void EffectiveConfig::add_flag(const std::string& key, bool value) {
  entries_.emplace_back(key, value ? "true" : "false");
}

std::string EffectiveConfig::text() const {
  std::string out;
  for (const auto& [k, v] : entries_) out += k + "=" + v + "\n";
  return out;
}

void EffectiveConfig::echo() const {
  std::cout << "# effective config\n" << text();
}

void EffectiveConfig::save(const std::string& dir) const {
  const std::string path = dir + "/config.txt";
  std::ofstream os(path, std::ios::binary);
  contract_check(os.good(), "cannot write " + path);
  os << text();
  contract_check(os.good(), "write failed: " + path);
}

void prepare_out_dir(const std::string& dir, bool force) {
  std::error_code ec;
  if (fs::exists(dir, ec)) {
    if (!fs::is_directory(dir, ec))
      throw UsageError("output path exists and is not a directory: " + dir);
    if (!fs::is_empty(dir, ec)) {
      if (!force)
        throw UsageError("output directory not empty (use --force): " + dir);
      fs::remove_all(dir, ec);
      if (ec) throw ContractError("cannot clear " + dir + ": " + ec.message());
    }
  }
  fs::create_directories(dir, ec);
  if (ec) throw ContractError("cannot create " + dir + ": " + ec.message());
}

void write_poses(const std::string& path, const std::vector<CameraPose>& ps) {
  std::ofstream os(path, std::ios::binary);
  contract_check(os.good(), "cannot write " + path);
  os.precision(17);
  for (const CameraPose& p : ps) {
    for (int i = 0; i < 9; ++i) os << p.r.m[i] << (i == 8 ? "" : " ");
    os << " " << p.t.x << " " << p.t.y << " " << p.t.z << "\n";
  }
  contract_check(os.good(), "write failed: " + path);
}

std::vector<CameraPose> read_poses(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is.good()) throw FormatError("cannot open " + path);
  std::vector<CameraPose> out;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    CameraPose p;
    for (int i = 0; i < 9; ++i) ls >> p.r.m[i];
    ls >> p.t.x >> p.t.y >> p.t.z;
    if (!ls) throw FormatError("bad pose line in " + path);
    out.push_back(p);
  }
  return out;
}

void write_kv(const std::string& path,
              const std::vector<std::pair<std::string, std::string>>& kv) {
  std::ofstream os(path, std::ios::binary);
  contract_check(os.good(), "cannot write " + path);
  for (const auto& [k, v] : kv) os << k << "=" << v << "\n";
  contract_check(os.good(), "write failed: " + path);
}

std::vector<std::pair<std::string, std::string>> read_kv(
    const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is.good()) throw FormatError("cannot open " + path);
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    const size_t eq = line.find('=');
    if (eq == std::string::npos) throw FormatError("bad line in " + path);
    out.emplace_back(line.substr(0, eq), line.substr(eq + 1));
  }
  return out;
}

std::string kv_get(const std::vector<std::pair<std::string, std::string>>& kv,
                   const std::string& key) {
  for (const auto& [k, v] : kv)
    if (k == key) return v;
  throw FormatError("missing manifest key: " + key);
}

int64_t kv_get_int(
    const std::vector<std::pair<std::string, std::string>>& kv,
    const std::string& key) {
  const std::string v = kv_get(kv, key);
  try {
    size_t pos = 0;
    const int64_t n = std::stoll(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return n;
  } catch (const std::exception&) {
    throw FormatError("bad integer for manifest key " + key + ": " + v);
  }
}

std::string scene_dir(const std::string& root, int64_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "scene_%03" PRId64, index);
  return root + "/" + buf;
}

std::vector<SceneSequence> load_dataset(const std::string& dir) {
  const auto manifest = read_kv(dir + "/manifest.txt");
  const int64_t n = kv_get_int(manifest, "scenes");
  std::vector<SceneSequence> out;
  out.reserve((size_t)n);
  for (int64_t i = 0; i < n; ++i) out.push_back(load_scene(scene_dir(dir, i)));
  return out;
}

namespace {

std::string frame_file(const std::string& dir, const char* stem, int64_t i) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%s_%03" PRId64 ".gten", stem, i);
  return dir + "/" + buf;
}

}  // namespace

void write_predictions(const std::string& dir, const Predictions& p) {
  const int64_t hw = p.h * p.w;
  for (size_t i = 0; i < p.points.size(); ++i) {
    const PointMap& m = p.points[i];
    contract_check(m.h == p.h && m.w == p.w && (int64_t)m.pts.size() == hw,
                   "write_predictions: point map shape");
    std::vector<double> xyz((size_t)hw * 3), valid((size_t)hw);
    for (int64_t j = 0; j < hw; ++j) {
      xyz[(size_t)(j * 3 + 0)] = m.pts[(size_t)j].x;
      xyz[(size_t)(j * 3 + 1)] = m.pts[(size_t)j].y;
      xyz[(size_t)(j * 3 + 2)] = m.pts[(size_t)j].z;
      valid[(size_t)j] = m.valid[(size_t)j] ? 1.0 : 0.0;
    }
    save_gten(frame_file(dir, "points", (int64_t)i),
              Tensor64::from_data({p.h, p.w, 3}, std::move(xyz)));
    save_gten(frame_file(dir, "valid", (int64_t)i),
              Tensor64::from_data({p.h, p.w}, std::move(valid)));
    contract_check((int64_t)p.confidence[i].size() == hw,
                   "write_predictions: confidence shape");
    save_gten(frame_file(dir, "conf", (int64_t)i),
              Tensor64::from_data({p.h, p.w}, p.confidence[i]));
  }
  write_poses(dir + "/poses.txt", p.poses);
}

Predictions read_predictions(const std::string& dir) {
  const auto manifest = read_kv(dir + "/manifest.txt");
  Predictions p;
  p.h = kv_get_int(manifest, "height");
  p.w = kv_get_int(manifest, "width");
  const int64_t n = kv_get_int(manifest, "frames");
  const int64_t hw = p.h * p.w;
  for (int64_t i = 0; i < n; ++i) {
    const Tensor64 xyz = load_gten<double>(frame_file(dir, "points", i));
    const Tensor64 valid = load_gten<double>(frame_file(dir, "valid", i));
    const Tensor64 conf = load_gten<double>(frame_file(dir, "conf", i));
    if (xyz.numel() != hw * 3 || valid.numel() != hw || conf.numel() != hw)
      throw FormatError("prediction tensors disagree with the manifest");
    PointMap m;
    m.init(p.h, p.w);
    for (int64_t j = 0; j < hw; ++j) {
      m.pts[(size_t)j] = Vec3{xyz.data()[j * 3 + 0], xyz.data()[j * 3 + 1],
                              xyz.data()[j * 3 + 2]};
      m.valid[(size_t)j] = valid.data()[j] != 0.0;
    }
    p.points.push_back(std::move(m));
    p.confidence.push_back(conf.vec());
  }
  p.poses = read_poses(dir + "/poses.txt");
  if ((int64_t)p.poses.size() != n)
    throw FormatError("pose count disagrees with the manifest");
  return p;
}

}  // namespace gart::cli
