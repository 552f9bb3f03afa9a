#pragma once

// Shared plumbing for the gart binary: effective-config files, the pose and
// prediction disk formats, and dataset manifests.

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "gart/geometry.hpp"
#include "gart/synthdata.hpp"

namespace gart::cli {

// Operator mistakes (bad flag combinations, refusals). main() maps these to
// exit code 1, while ContractError/FormatError map to 2.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Ordered key=value pairs; echoed to stdout and saved next to the outputs of
// every command. The saved file can be fed back through --config.
class EffectiveConfig {
 public:
  void add(const std::string& key, const std::string& value);
  void add(const std::string& key, int64_t value);
  void add(const std::string& key, uint64_t value);
  void add(const std::string& key, double value);
  void add_flag(const std::string& key, bool value);

  std::string text() const;
  void echo() const;                          // stdout
  void save(const std::string& dir) const;    // dir/config.txt

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

// Refuses a non-empty output directory unless force, which wipes it first.
// Creates the directory (parents included) either way.
void prepare_out_dir(const std::string& dir, bool force);

// Text pose files, one world-to-camera pose per line: nine row-major
// rotation entries then the translation, full double precision.
void write_poses(const std::string& path, const std::vector<CameraPose>& ps);
std::vector<CameraPose> read_poses(const std::string& path);

// Plain-text key=value tables (dataset and prediction manifests).
void write_kv(const std::string& path,
              const std::vector<std::pair<std::string, std::string>>& kv);
std::vector<std::pair<std::string, std::string>> read_kv(
    const std::string& path);
std::string kv_get(const std::vector<std::pair<std::string, std::string>>& kv,
                   const std::string& key);
int64_t kv_get_int(
    const std::vector<std::pair<std::string, std::string>>& kv,
    const std::string& key);

std::string scene_dir(const std::string& root, int64_t index);

// Loads every scene listed in a dataset manifest written by cmd_synth.
std::vector<SceneSequence> load_dataset(const std::string& dir);

// One inference export: dense global point maps anchored at frame 0,
// per-pixel confidence and validity, and frame-0-anchored poses.
struct Predictions {
  int64_t h = 0, w = 0;
  std::vector<PointMap> points;               // valid folded in
  std::vector<std::vector<double>> confidence;  // h*w each
  std::vector<CameraPose> poses;
};

void write_predictions(const std::string& dir, const Predictions& p);
Predictions read_predictions(const std::string& dir);

}  // namespace gart::cli
