// gart: one binary for the whole desk-scale workflow — synthesize scenes,
// train, run inference in the three modes, evaluate, benchmark the cache,
// and self-check invariants.
//
// Exit codes: 0 ok, 1 usage, 2 contract or format error, 3 failed checks.

#include <algorithm>
#include <chrono>
#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "checks.hpp"
#include "cli_util.hpp"
#include "gart/error.hpp"
#include "gart/evalsuite.hpp"
#include "gart/geometry.hpp"
#include "gart/kvcache.hpp"
#include "gart/model.hpp"
#include "gart/rng.hpp"
#include "gart/synthdata.hpp"
#include "gart/trainer.hpp"

namespace gart::cli {
namespace {

EvictPolicy parse_policy(const std::string& s) {
  if (s == "fifo") return EvictPolicy::kFifo;
  if (s == "random") return EvictPolicy::kRandom;
  if (s == "merge") return EvictPolicy::kMerge;
  if (s == "stride") return EvictPolicy::kStride;
  throw UsageError("unknown --policy (want fifo|random|merge|stride): " + s);
}

AlignmentMode parse_align(const std::string& s) {
  if (s == "sim3") return AlignmentMode::kSim3;
  if (s == "median") return AlignmentMode::kMedian;
  if (s == "none") return AlignmentMode::kNone;
  throw UsageError("unknown --align (want sim3|median|none): " + s);
}

std::vector<int64_t> parse_int_list(const std::string& s, const char* flag) {
  std::vector<int64_t> out;
  size_t pos = 0;
  while (pos <= s.size()) {
    const size_t comma = std::min(s.find(',', pos), s.size());
    const std::string item = s.substr(pos, comma - pos);
    try {
      size_t used = 0;
      out.push_back(std::stoll(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw UsageError(std::string("bad integer list for ") + flag + ": " + s);
    }
    pos = comma + 1;
  }
  if (out.empty()) throw UsageError(std::string(flag) + ": empty list");
  return out;
}

std::vector<std::string> parse_name_list(const std::string& s) {
  std::vector<std::string> out;
  size_t pos = 0;
  while (pos <= s.size()) {
    const size_t comma = std::min(s.find(',', pos), s.size());
    out.push_back(s.substr(pos, comma - pos));
    pos = comma + 1;
  }
  return out;
}

std::vector<FrameBundle> image_only_bundles(const SceneSequence& scene) {
  std::vector<FrameBundle> out;
  for (size_t i = 0; i < scene.frames.size(); ++i) {
    FrameModalities none;
    out.push_back(
        frame_bundle_from_scene(scene.frames[i], (int64_t)i, none, 0));
  }
  return out;
}

// --- synth ------------------------------------------------------------------

struct SynthOpts {
  int64_t scenes = 4, frames = 8, height = 32, width = 32;
  uint64_t seed = 0;
  std::string out;
  bool force = false;
};

int cmd_synth(const SynthOpts& o) {
  if (o.out.empty()) throw UsageError("--out is required");
  if (o.scenes < 0) throw UsageError("synth: --scenes must be >= 0");
  prepare_out_dir(o.out, o.force);

  EffectiveConfig cfg;
  cfg.add("scenes", o.scenes);
  cfg.add("frames", o.frames);
  cfg.add("height", o.height);
  cfg.add("width", o.width);
  cfg.add("seed", o.seed);
  cfg.add("out", o.out);
  cfg.add_flag("force", o.force);
  cfg.echo();
  cfg.save(o.out);

  std::vector<std::pair<std::string, std::string>> manifest;
  manifest.emplace_back("scenes", std::to_string(o.scenes));
  manifest.emplace_back("frames_per_scene", std::to_string(o.frames));
  manifest.emplace_back("total_frames", std::to_string(o.scenes * o.frames));
  manifest.emplace_back("height", std::to_string(o.height));
  manifest.emplace_back("width", std::to_string(o.width));
  manifest.emplace_back("seed", std::to_string(o.seed));

  // Scene seeds come off the master stream in order, so a dataset written
  // here trains identically to the trainer's internally generated pool.
  Rng master(o.seed);
  for (int64_t i = 0; i < o.scenes; ++i) {
    const uint64_t scene_seed = master.next_u64();
    const SceneSequence scene =
        generate_scene(scene_seed, o.frames, o.height, o.width);
    save_scene(scene, scene_dir(o.out, i));
    char key[32];
    std::snprintf(key, sizeof key, "scene_%03" PRId64 ".seed", i);
    manifest.emplace_back(key, std::to_string(scene_seed));
  }
  write_kv(o.out + "/manifest.txt", manifest);
  std::cout << "synth: wrote " << o.scenes << " scenes to " << o.out << "\n";
  return 0;
}

// --- train --------------------------------------------------------------

struct TrainOpts {
  std::string data, out;
  uint64_t seed = 0, init_seed = 0;
  bool force = false, emit_plot = false;
  int64_t steps = 2000, scenes = 32, scene_frames = 8, seq_min = 4,
          seq_max = 8;
  double lr = 3e-4, weight_decay = 0.0, clip_norm = 1.0, beta1 = 0.9,
         beta2 = 0.999, eps = 1e-8;
  int64_t layers = 4, dim = 64, heads = 4, patch = 8, height = 32, width = 32,
          max_group = 8;
};

int cmd_train(const TrainOpts& o) {
  if (o.out.empty()) throw UsageError("--out is required");
  std::vector<SceneSequence> dataset;
  int64_t height = o.height, width = o.width;
  int64_t n_scenes = o.scenes, scene_frames = o.scene_frames;
  if (!o.data.empty()) {
    dataset = load_dataset(o.data);
    const auto manifest = read_kv(o.data + "/manifest.txt");
    height = kv_get_int(manifest, "height");
    width = kv_get_int(manifest, "width");
    n_scenes = (int64_t)dataset.size();
    scene_frames = kv_get_int(manifest, "frames_per_scene");
  }

  ModelConfig mc;
  mc.layers = o.layers;
  mc.dim = o.dim;
  mc.heads = o.heads;
  mc.patch = o.patch;
  mc.image_h = height;
  mc.image_w = width;
  mc.max_group = o.max_group;
  mc.init_seed = o.init_seed;

  TrainConfig tc;
  tc.steps = o.steps;
  tc.n_scenes = n_scenes;
  tc.scene_frames = scene_frames;
  tc.seq_min = o.seq_min;
  tc.seq_max = o.seq_max;
  tc.seed = o.seed;
  tc.opt.lr = o.lr;
  tc.opt.weight_decay = o.weight_decay;
  tc.opt.clip_norm = o.clip_norm;
  tc.opt.beta1 = o.beta1;
  tc.opt.beta2 = o.beta2;
  tc.opt.eps = o.eps;

  prepare_out_dir(o.out, o.force);
  EffectiveConfig cfg;
  cfg.add("data", o.data);
  cfg.add("steps", tc.steps);
  cfg.add("scenes", n_scenes);
  cfg.add("scene-frames", scene_frames);
  cfg.add("seq-min", tc.seq_min);
  cfg.add("seq-max", tc.seq_max);
  cfg.add("seed", tc.seed);
  cfg.add("lr", tc.opt.lr);
  cfg.add("weight-decay", tc.opt.weight_decay);
  cfg.add("clip-norm", tc.opt.clip_norm);
  cfg.add("beta1", tc.opt.beta1);
  cfg.add("beta2", tc.opt.beta2);
  cfg.add("eps", tc.opt.eps);
  cfg.add("layers", mc.layers);
  cfg.add("dim", mc.dim);
  cfg.add("heads", mc.heads);
  cfg.add("patch", mc.patch);
  cfg.add("height", mc.image_h);
  cfg.add("width", mc.image_w);
  cfg.add("max-group", mc.max_group);
  cfg.add("init-seed", mc.init_seed);
  cfg.add("out", o.out);
  cfg.echo();
  cfg.save(o.out);

  Model<double> model(mc);
  std::ofstream csv(o.out + "/loss.csv", std::ios::binary);
  contract_check(csv.good(), "cannot write " + o.out + "/loss.csv");

  const TrainResult result = dataset.empty()
                                 ? train(model, tc, &csv)
                                 : train(model, tc, dataset, &csv);
  csv.close();
  model.save(o.out + "/model.gart");

  if (o.emit_plot && !result.rows.empty()) {
    ChartSeries rel{"rel_point", {}}, abs{"abs_point", {}}, tot{"total", {}};
    for (const LossRow& r : result.rows) {
      rel.pts.emplace_back((double)r.step, r.rel_point);
      abs.pts.emplace_back((double)r.step, r.abs_point);
      tot.pts.emplace_back((double)r.step, r.total);
    }
    write_svg_line_chart(o.out + "/loss.svg", "training loss", "step", "loss",
                         {rel, abs, tot});
  }

  if (result.rows.empty()) {
    std::cout << "train: 0 steps, checkpoint is the initialization\n";
  } else {
    const LossRow& last = result.rows.back();
    std::cout << "train: " << result.rows.size() << " steps, final total "
              << last.total << " (rel_point " << last.rel_point
              << ", abs_point " << last.abs_point << ")\n";
  }
  return 0;
}

// --- infer --------------------------------------------------------------

struct InferOpts {
  std::string ckpt, data, out, mode = "offline", policy = "fifo";
  int64_t group = 1, queue = -1, prefill = 1;
  uint64_t seed = 0;
  bool force = false;
};

int cmd_infer(const InferOpts& o) {
  if (o.ckpt.empty()) throw UsageError("--ckpt is required");
  if (o.data.empty()) throw UsageError("--data is required");
  if (o.out.empty()) throw UsageError("--out is required");
  if (o.mode != "offline" && o.mode != "online" && o.mode != "hybrid")
    throw UsageError("unknown --mode (want offline|online|hybrid): " + o.mode);
  const EvictPolicy policy = parse_policy(o.policy);
  if (o.group < 1) throw UsageError("infer: --group-size must be >= 1");

  Model<double> model = Model<double>::load(o.ckpt);
  const int64_t queue =
      o.queue < 0 ? 2 * model.config().max_group : o.queue;
  if (o.mode == "online" && queue > 0 && o.group > queue)
    throw UsageError("infer: --group-size exceeds --queue in online mode");

  const SceneSequence scene = load_scene(o.data);
  const std::vector<FrameBundle> bundles = image_only_bundles(scene);

  prepare_out_dir(o.out, o.force);
  EffectiveConfig cfg;
  cfg.add("ckpt", o.ckpt);
  cfg.add("data", o.data);
  cfg.add("mode", o.mode);
  cfg.add("group-size", o.group);
  cfg.add("queue", queue);
  cfg.add("policy", o.policy);
  cfg.add("prefill", o.prefill);
  cfg.add("seed", o.seed);
  cfg.add("out", o.out);
  cfg.echo();
  cfg.save(o.out);

  ModelOutput<double> out;
  if (o.mode == "offline") {
    out = model.forward_offline(bundles, o.group);
  } else if (o.mode == "online") {
    out = model.forward_online(bundles, o.group, queue, policy, o.seed);
  } else {
    out = model.forward_hybrid(bundles, o.prefill, queue, policy, o.seed);
  }

  Predictions p;
  p.h = scene.h;
  p.w = scene.w;
  p.points = global_points(out, bundles, /*anchor=*/0);
  const CameraPose anchor = out.frames[0].pose();
  for (const FrameOutput<double>& f : out.frames) {
    p.confidence.push_back(f.confidence.vec());
    p.poses.push_back(relative_pose(f.pose(), anchor));
  }
  write_predictions(o.out, p);

  int64_t peak_frames = 0, peak_floats = 0, peak_keys = 0;
  for (const StepStats& s : out.steps) {
    peak_frames = std::max(peak_frames, s.cached_frames);
    peak_floats = std::max(peak_floats, s.cache_floats);
    peak_keys = std::max(peak_keys, s.touched_keys);
  }
  std::vector<std::pair<std::string, std::string>> manifest;
  manifest.emplace_back("mode", o.mode);
  manifest.emplace_back("group_size", std::to_string(o.group));
  manifest.emplace_back("queue", std::to_string(queue));
  manifest.emplace_back("policy", o.policy);
  manifest.emplace_back("prefill", std::to_string(o.prefill));
  manifest.emplace_back("seed", std::to_string(o.seed));
  manifest.emplace_back("frames", std::to_string(bundles.size()));
  manifest.emplace_back("height", std::to_string(scene.h));
  manifest.emplace_back("width", std::to_string(scene.w));
  manifest.emplace_back("anchor", "0");
  manifest.emplace_back("peak_cached_frames", std::to_string(peak_frames));
  manifest.emplace_back("peak_kv_floats", std::to_string(peak_floats));
  manifest.emplace_back("peak_touched_keys", std::to_string(peak_keys));
  manifest.emplace_back("config_digest",
                        std::to_string(model.config().digest()));
  write_kv(o.out + "/manifest.txt", manifest);

  std::cout << "infer: " << bundles.size() << " frames in " << o.mode
            << " mode, peak cached frames " << peak_frames << "\n";
  return 0;
}

// --- eval ---------------------------------------------------------------

struct EvalOpts {
  std::string pred, data, out, align = "sim3";
  bool force = false;
};

// Everything is compared in the frame of camera 0: predictions export that
// way, and ground truth is re-anchored here the same way.
int cmd_eval(const EvalOpts& o) {
  if (o.pred.empty()) throw UsageError("--pred is required");
  if (o.data.empty()) throw UsageError("--data is required");
  if (o.out.empty()) throw UsageError("--out is required");
  const AlignmentMode mode = parse_align(o.align);
  const Predictions p = read_predictions(o.pred);
  const SceneSequence scene = load_scene(o.data);
  contract_check(p.points.size() == scene.frames.size(),
                 "eval: prediction and scene frame counts differ");
  contract_check(p.h == scene.h && p.w == scene.w,
                 "eval: prediction and scene resolutions differ");

  EvalInputs in;
  in.pred_poses = p.poses;
  for (size_t f = 0; f < p.points.size(); ++f) {
    const PointMap& m = p.points[f];
    DepthMap d;
    d.init(p.h, p.w);
    for (size_t j = 0; j < m.pts.size(); ++j) {
      d.valid[j] = m.valid[j];
      d.depth[j] = apply_pose(p.poses[f], m.pts[j]).z;
    }
    in.pred_depths.push_back(std::move(d));
    const PointMap normals = surface_normals(m);
    for (size_t j = 0; j < m.pts.size(); ++j) {
      if (!m.valid[j]) continue;
      in.pred_cloud.push_back(m.pts[j]);
      in.pred_normals.push_back(normals.valid[j] ? normals.pts[j]
                                                 : Vec3{0, 0, 0});
    }
  }

  const CameraPose gt_anchor = scene.frames[0].pose;
  for (size_t f = 0; f < scene.frames.size(); ++f) {
    const SceneFrame& sf = scene.frames[f];
    const CameraPose pose = relative_pose(sf.pose, gt_anchor);
    in.gt_poses.push_back(pose);
    in.gt_depths.push_back(sf.depth);
    const PointMap local = local_points_from_depth(sf.depth, sf.k);
    const PointMap global = global_from_local(local, pose);
    const PointMap normals = surface_normals(global);
    for (size_t j = 0; j < global.pts.size(); ++j) {
      if (!global.valid[j]) continue;
      in.gt_cloud.push_back(global.pts[j]);
      in.gt_normals.push_back(normals.valid[j] ? normals.pts[j]
                                               : Vec3{0, 0, 0});
    }
  }

  const EvalReport report = evaluate(in, mode);

  prepare_out_dir(o.out, o.force);
  EffectiveConfig cfg;
  cfg.add("pred", o.pred);
  cfg.add("data", o.data);
  cfg.add("align", o.align);
  cfg.add("out", o.out);
  cfg.echo();
  cfg.save(o.out);

  const std::string csv = report_csv(report);
  std::ofstream os(o.out + "/report.csv", std::ios::binary);
  contract_check(os.good(), "cannot write " + o.out + "/report.csv");
  os << csv;
  os.close();
  std::cout << report_table(report);
  return 0;
}

// --- bench --------------------------------------------------------------

struct BenchOpts {
  std::string ckpt, out;
  std::string n_list = "8,16,24,32", q_list = "2,4,8,16", g_list = "1,2,4",
              policies = "fifo,random,merge,stride";
  int64_t bench_n = 24, bench_q = 4;
  uint64_t seed = 0;
  bool force = false;
};

struct BenchRow {
  int64_t n, g, q;
  std::string policy;
  double ms_per_frame;
  int64_t peak_frames, peak_floats;
};

BenchRow bench_run(const Model<double>& model,
                   const std::vector<FrameBundle>& frames, int64_t n,
                   int64_t g, int64_t q, EvictPolicy policy,
                   const std::string& policy_name, uint64_t seed) {
  const std::vector<FrameBundle> prefix(frames.begin(), frames.begin() + n);
  const auto t0 = std::chrono::steady_clock::now();
  const ModelOutput<double> out =
      model.forward_online(prefix, g, q, policy, seed);
  const auto t1 = std::chrono::steady_clock::now();
  BenchRow row{n, g, q, policy_name, 0.0, 0, 0};
  row.ms_per_frame =
      std::chrono::duration<double, std::milli>(t1 - t0).count() / (double)n;
  for (const StepStats& s : out.steps) {
    row.peak_frames = std::max(row.peak_frames, s.cached_frames);
    row.peak_floats = std::max(row.peak_floats, s.cache_floats);
  }
  return row;
}

int cmd_bench(const BenchOpts& o) {
  if (o.out.empty()) throw UsageError("--out is required");
  const std::vector<int64_t> ns = parse_int_list(o.n_list, "--n-list");
  const std::vector<int64_t> qs = parse_int_list(o.q_list, "--q-list");
  const std::vector<int64_t> gs = parse_int_list(o.g_list, "--g-list");
  const std::vector<std::string> policy_names = parse_name_list(o.policies);
  std::vector<EvictPolicy> policies;
  for (const std::string& s : policy_names) policies.push_back(parse_policy(s));

  const Model<double> model = o.ckpt.empty()
                                  ? Model<double>(ModelConfig{})
                                  : Model<double>::load(o.ckpt);
  int64_t max_n = o.bench_n;
  for (int64_t n : ns) max_n = std::max(max_n, n);
  const int64_t max_g = *std::max_element(gs.begin(), gs.end());

  prepare_out_dir(o.out, o.force);
  EffectiveConfig cfg;
  cfg.add("ckpt", o.ckpt);
  cfg.add("n-list", o.n_list);
  cfg.add("q-list", o.q_list);
  cfg.add("g-list", o.g_list);
  cfg.add("policies", o.policies);
  cfg.add("bench-n", o.bench_n);
  cfg.add("bench-q", o.bench_q);
  cfg.add("seed", o.seed);
  cfg.add("out", o.out);
  cfg.echo();
  cfg.save(o.out);

  const SceneSequence scene = generate_scene(
      o.seed, max_n, model.config().image_h, model.config().image_w);
  const std::vector<FrameBundle> frames = image_only_bundles(scene);

  std::vector<BenchRow> rows;
  // Sequence-length sweep at a small fixed capacity, plus the unbounded
  // contrast where per-frame cost keeps growing.
  for (int64_t n : ns) {
    rows.push_back(bench_run(model, frames, n, 1, o.bench_q,
                             EvictPolicy::kFifo, "fifo", o.seed));
    rows.push_back(
        bench_run(model, frames, n, 1, 0, EvictPolicy::kFifo, "fifo", o.seed));
  }
  const size_t capacity_first = rows.size();
  for (int64_t q : qs)
    for (size_t pi = 0; pi < policies.size(); ++pi)
      rows.push_back(bench_run(model, frames, o.bench_n, 1, q, policies[pi],
                               policy_names[pi], o.seed));
  const size_t group_first = rows.size();
  const int64_t group_q = 2 * max_g;
  for (int64_t g : gs)
    rows.push_back(bench_run(model, frames, o.bench_n, g, group_q,
                             EvictPolicy::kFifo, "fifo", o.seed));

  std::ofstream csv(o.out + "/bench.csv", std::ios::binary);
  contract_check(csv.good(), "cannot write " + o.out + "/bench.csv");
  csv << "n,g,q,policy,ms_per_frame,peak_cached_frames,peak_kv_floats\n";
  for (const BenchRow& r : rows) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%lld,%lld,%lld,%s,%.6g,%lld,%lld\n",
                  (long long)r.n, (long long)r.g, (long long)r.q,
                  r.policy.c_str(), r.ms_per_frame, (long long)r.peak_frames,
                  (long long)r.peak_floats);
    csv << buf;
  }
  csv.close();

  std::vector<ChartSeries> capacity_series;
  for (size_t pi = 0; pi < policy_names.size(); ++pi)
    capacity_series.push_back({policy_names[pi], {}});
  for (size_t i = capacity_first; i < group_first; ++i) {
    const BenchRow& r = rows[i];
    capacity_series[(i - capacity_first) % policy_names.size()].pts
        .emplace_back((double)r.q, r.ms_per_frame);
  }
  write_svg_line_chart(o.out + "/bench_capacity.svg",
                       "per-frame cost vs queue capacity", "queue capacity",
                       "ms per frame", capacity_series);

  ChartSeries group_series{"fifo", {}};
  for (size_t i = group_first; i < rows.size(); ++i)
    group_series.pts.emplace_back((double)rows[i].g, rows[i].ms_per_frame);
  write_svg_line_chart(o.out + "/bench_group.svg",
                       "per-frame cost vs group size", "group size",
                       "ms per frame", {group_series});

  ChartSeries bounded{"bounded queue", {}}, unbounded{"unbounded", {}};
  for (size_t i = 0; i < capacity_first; i += 2) {
    bounded.pts.emplace_back((double)rows[i].n, rows[i].ms_per_frame);
    unbounded.pts.emplace_back((double)rows[i + 1].n,
                               rows[i + 1].ms_per_frame);
  }
  write_svg_line_chart(o.out + "/bench_length.svg",
                       "per-frame cost vs sequence length", "frames",
                       "ms per frame", {bounded, unbounded});

  std::cout << "bench: " << rows.size() << " rows -> " << o.out << "\n";
  return 0;
}

// --- main -----------------------------------------------------------------

// Feeds key=value defaults from `path` into `sub`'s options. Values the user
// already passed on the command line keep priority, so replaying a saved
// config.txt with a fresh --out reproduces the original run. (CLI11's own
// set_config only fires on the top-level app, never on a subcommand.)
void apply_config_file(CLI::App* sub, const std::string& path) {
  if (path.empty()) return;
  if (!std::filesystem::exists(path))
    throw UsageError("config file not found: " + path);
  for (const auto& [key, value] : read_kv(path)) {
    if (key == "config") continue;
    CLI::Option* opt = sub->get_option_no_throw("--" + key);
    if (opt == nullptr)
      throw UsageError("unknown key '" + key + "' in " + path);
    if (opt->count() > 0) continue;
    opt->add_result(value);
    opt->run_callback();
  }
}

int run(int argc, char** argv) {
  CLI::App app{"group-autoregressive point-map perception toolkit"};
  app.require_subcommand(1);
  int rc = 0;

  SynthOpts so;
  CLI::App* synth =
      app.add_subcommand("synth", "render a synthetic scene dataset");
  std::string synth_cfg;
  synth->add_option("--config", synth_cfg,
                    "key=value defaults; command-line flags win");
  synth->add_option("--scenes", so.scenes, "number of scenes")
      ->capture_default_str();
  synth->add_option("--frames", so.frames, "frames per scene")
      ->capture_default_str();
  synth->add_option("--height", so.height, "image height")
      ->capture_default_str();
  synth->add_option("--width", so.width, "image width")
      ->capture_default_str();
  synth->add_option("--seed", so.seed, "master seed")->capture_default_str();
  synth->add_option("--out", so.out, "output directory");
  synth->add_flag("--force", so.force, "overwrite a non-empty directory");
  synth->callback([&] {
    apply_config_file(synth, synth_cfg);
    rc = cmd_synth(so);
  });

  TrainOpts to;
  CLI::App* train = app.add_subcommand(
      "train", "optimize a model on synthetic scenes, write checkpoint + CSV");
  std::string train_cfg;
  train->add_option("--config", train_cfg,
                    "key=value defaults; command-line flags win");
  train->add_option("--data", to.data,
                    "dataset directory (omit to synthesize in memory)");
  train->add_option("--steps", to.steps, "optimization steps")
      ->capture_default_str();
  train->add_option("--scenes", to.scenes, "pool size without --data")
      ->capture_default_str();
  train->add_option("--scene-frames", to.scene_frames,
                    "frames per pool scene without --data")
      ->capture_default_str();
  train->add_option("--seq-min", to.seq_min, "shortest training sequence")
      ->capture_default_str();
  train->add_option("--seq-max", to.seq_max, "longest training sequence")
      ->capture_default_str();
  train->add_option("--seed", to.seed, "training seed")->capture_default_str();
  train->add_option("--lr", to.lr, "learning rate")->capture_default_str();
  train->add_option("--weight-decay", to.weight_decay, "decoupled decay")
      ->capture_default_str();
  train->add_option("--clip-norm", to.clip_norm, "gradient clip (<=0 off)")
      ->capture_default_str();
  train->add_option("--beta1", to.beta1, "first moment decay")
      ->capture_default_str();
  train->add_option("--beta2", to.beta2, "second moment decay")
      ->capture_default_str();
  train->add_option("--eps", to.eps, "optimizer epsilon")
      ->capture_default_str();
  train->add_option("--layers", to.layers, "transformer layers")
      ->capture_default_str();
  train->add_option("--dim", to.dim, "token width")->capture_default_str();
  train->add_option("--heads", to.heads, "attention heads")
      ->capture_default_str();
  train->add_option("--patch", to.patch, "patch size")->capture_default_str();
  train->add_option("--height", to.height, "image height without --data")
      ->capture_default_str();
  train->add_option("--width", to.width, "image width without --data")
      ->capture_default_str();
  train->add_option("--max-group", to.max_group, "largest group size")
      ->capture_default_str();
  train->add_option("--init-seed", to.init_seed, "parameter init seed")
      ->capture_default_str();
  train->add_option("--out", to.out, "output directory");
  train->add_flag("--force", to.force, "overwrite a non-empty directory");
  train->add_flag("--emit-plot", to.emit_plot, "write loss.svg");
  train->callback([&] {
    apply_config_file(train, train_cfg);
    rc = cmd_train(to);
  });

  InferOpts io;
  CLI::App* infer = app.add_subcommand(
      "infer", "export point maps, poses, and confidences for one scene");
  std::string infer_cfg;
  infer->add_option("--config", infer_cfg,
                    "key=value defaults; command-line flags win");
  infer->add_option("--ckpt", io.ckpt, "checkpoint path");
  infer->add_option("--data", io.data, "scene directory");
  infer->add_option("--mode", io.mode, "offline|online|hybrid")
      ->capture_default_str();
  infer->add_option("--group-size", io.group, "frames per group step")
      ->capture_default_str();
  infer->add_option("--queue", io.queue,
                    "cache capacity in frames; 0 unbounded, default 2x "
                    "max-group");
  infer->add_option("--policy", io.policy, "fifo|random|merge|stride")
      ->capture_default_str();
  infer->add_option("--prefill", io.prefill, "hybrid prefill frame count")
      ->capture_default_str();
  infer->add_option("--seed", io.seed, "eviction seed")->capture_default_str();
  infer->add_option("--out", io.out, "output directory");
  infer->add_flag("--force", io.force, "overwrite a non-empty directory");
  infer->callback([&] {
    apply_config_file(infer, infer_cfg);
    rc = cmd_infer(io);
  });

  EvalOpts eo;
  CLI::App* eval = app.add_subcommand(
      "eval", "score a prediction export against its source scene");
  std::string eval_cfg;
  eval->add_option("--config", eval_cfg,
                    "key=value defaults; command-line flags win");
  eval->add_option("--pred", eo.pred, "prediction directory");
  eval->add_option("--data", eo.data, "scene directory");
  eval->add_option("--align", eo.align, "sim3|median|none")
      ->capture_default_str();
  eval->add_option("--out", eo.out, "output directory");
  eval->add_flag("--force", eo.force, "overwrite a non-empty directory");
  eval->callback([&] {
    apply_config_file(eval, eval_cfg);
    rc = cmd_eval(eo);
  });

  BenchOpts bo;
  CLI::App* bench = app.add_subcommand(
      "bench", "sweep cache capacity, group size, and sequence length");
  std::string bench_cfg;
  bench->add_option("--config", bench_cfg,
                    "key=value defaults; command-line flags win");
  bench->add_option("--ckpt", bo.ckpt, "checkpoint (omit for a fresh model)");
  bench->add_option("--n-list", bo.n_list, "sequence lengths")
      ->capture_default_str();
  bench->add_option("--q-list", bo.q_list, "queue capacities")
      ->capture_default_str();
  bench->add_option("--g-list", bo.g_list, "group sizes")
      ->capture_default_str();
  bench->add_option("--policies", bo.policies, "eviction policies")
      ->capture_default_str();
  bench->add_option("--bench-n", bo.bench_n, "frames for fixed-N sweeps")
      ->capture_default_str();
  bench->add_option("--bench-q", bo.bench_q, "capacity for the length sweep")
      ->capture_default_str();
  bench->add_option("--seed", bo.seed, "scene seed")->capture_default_str();
  bench->add_option("--out", bo.out, "output directory");
  bench->add_flag("--force", bo.force, "overwrite a non-empty directory");
  bench->callback([&] {
    apply_config_file(bench, bench_cfg);
    rc = cmd_bench(bo);
  });

  std::string fault;
  CLI::App* check = app.add_subcommand(
      "check", "run the invariant suite, one line per check");
  check->add_option("--inject-fault", fault,
                    "corrupt one component to prove the check catches it");
  check->callback([&] {
    const int failures = run_checks(fault, std::cout);
    rc = failures > 0 ? 3 : 0;
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }
  return rc;
}

}  // namespace
}  // namespace gart::cli

int main(int argc, char** argv) {
  try {
    return gart::cli::run(argc, argv);
  } catch (const gart::cli::UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const gart::FormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const gart::ContractError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
