// Copyright 2026 The mrvox Authors
// SPDX-License-Identifier: Apache-2.0

// Command-line front end: label-gen, eval, forward and bench.
//
// Exit codes: 0 success, 1 configuration or usage error, 2 missing file,
// 3 unparsable file, 4 dimension mismatch.

#ifndef MRVOX_CLI_HPP
#define MRVOX_CLI_HPP

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "mrvox/bench.hpp"
#include "mrvox/config.hpp"
#include "mrvox/error.hpp"
#include "mrvox/io.hpp"
#include "mrvox/metrics.hpp"
#include "mrvox/occlusion.hpp"
#include "mrvox/pipeline.hpp"
#include "mrvox/synthetic.hpp"

namespace mrvox::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

inline constexpr const char* kDatasetRootEnv = "MRVOX_DATASET_ROOT";

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;
inline constexpr int kExitNotFound = 2;
inline constexpr int kExitParse = 3;
inline constexpr int kExitDimMismatch = 4;

inline int exit_code(Errc code) {
  switch (code) {
    case Errc::kNotFound: return kExitNotFound;
    case Errc::kParseError: return kExitParse;
    case Errc::kDimMismatch: return kExitDimMismatch;
    default: return kExitConfig;
  }
}

inline void write_text(const fs::path& path, const std::string& text) {
  io::write_bytes(path, {text.begin(), text.end()});
}

inline json histogram_json(const LabelHistogram& h) {
  return {{"empty", h.empty}, {"non_occluded", h.non_occluded}, {"occluded", h.occluded}};
}

inline PipelineConfig config_or_default(const std::string& path) {
  return path.empty() ? PipelineConfig{} : load_config(path);
}

// ---------------------------------------------------------------------------

struct LabelGenArgs {
  std::string dataset = "semantickitti";
  std::string sequence = "00";
  std::string out;
  std::string root;
  std::string config;
  std::optional<int> stride;
  std::optional<std::uint64_t> seed;
};

inline int label_gen(const LabelGenArgs& a, std::ostream& log) {
  PipelineConfig cfg = config_or_default(a.config);
  if (a.seed) cfg.seed = *a.seed;
  const int stride = a.stride.value_or(cfg.camera_stride);
  if (stride <= 0) throw Error(Errc::kConfigError, "--stride must be positive");
  const fs::path out = a.out;

  json frames = json::array();
  LabelHistogram total;
  const auto record = [&](const std::string& frame, const OcclusionVolume& vol) {
    const fs::path file = out / (frame + ".occ");
    io::write_occlusion(file, vol.occlusion, vol.geometry, cfg.seed);
    const LabelHistogram h = histogram(vol.occlusion);
    total.empty += h.empty;
    total.non_occluded += h.non_occluded;
    total.occluded += h.occluded;
    const auto d = vol.geometry.dims();
    frames.push_back({{"frame", frame},
                      {"file", file.filename().string()},
                      {"dims", {d[0], d[1], d[2]}},
                      {"histogram", histogram_json(h)}});
    log << frame << ": non-occluded " << h.non_occluded << ", occluded " << h.occluded
        << ", empty " << h.empty << '\n';
  };

  if (a.dataset == "synthetic") {
    const SyntheticScene scene = build_scene(
        named_scene_spec(a.sequence, cfg.geometry, cfg.seed_for("scene"), cfg.image_channels));
    record("000000", generate_occlusion_labels(scene.cloud, scene.rig(), scene.gt,
                                               scene.geometry(), stride));
  } else if (a.dataset == "semantickitti") {
    std::string root = a.root;
    if (root.empty()) {
      if (const char* env = std::getenv(kDatasetRootEnv)) root = env;
    }
    if (root.empty()) {
      throw Error(Errc::kConfigError, std::string("no dataset root: pass --root or set ") +
                                          kDatasetRootEnv);
    }
    const fs::path seq = fs::path(root) / "sequences" / a.sequence;
    const fs::path voxels = seq / "voxels";
    if (!fs::is_directory(voxels)) throw Error(Errc::kNotFound, voxels.string());
    const CameraModel cam = io::camera_from_calib(io::read_kitti_calib(seq / "calib.txt"));
    const GridGeometry geom = GridGeometry::semantic_kitti();
    std::vector<std::string> ids;
    for (const auto& e : fs::directory_iterator(voxels)) {
      if (e.path().extension() == ".label") ids.push_back(e.path().stem().string());
    }
    std::sort(ids.begin(), ids.end());
    if (ids.empty()) throw Error(Errc::kNotFound, "no .label files in " + voxels.string());
    for (const auto& id : ids) {
      SemanticVolume gt = io::read_labels(voxels / (id + ".label"), geom.dims());
      io::remap_labels(gt);
      const fs::path invalid = voxels / (id + ".invalid");
      if (fs::exists(invalid)) io::apply_invalid(gt, io::read_mask(invalid, geom.dims()));
      const PointCloud pc = io::read_velodyne(seq / "velodyne" / (id + ".bin"));
      record(id, generate_occlusion_labels(pc, {cam}, gt, geom, stride));
    }
  } else {
    throw Error(Errc::kConfigError, "unknown dataset '" + a.dataset + "'");
  }

  json summary = {{"dataset", a.dataset},
                  {"sequence", a.sequence},
                  {"stride", stride},
                  {"seed", cfg.seed},
                  {"frames", frames},
                  {"total", histogram_json(total)}};
  write_text(out / "summary.json", summary.dump(2) + "\n");
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct EvalArgs {
  std::string pred;
  std::string gt;
  std::size_t classes = 20;
  std::string out;
};

inline json metrics_json(const MetricsReport& m) {
  json per_class = json::array();
  for (const auto& v : m.per_class_iou) {
    per_class.push_back(v ? json(*v) : json(nullptr));
  }
  return {{"iou", m.iou},
          {"miou", m.miou},
          {"per_class_iou", per_class},
          {"evaluated_voxels", m.evaluated_voxels}};
}

inline int eval(const EvalArgs& a, std::ostream& log) {
  std::optional<io::VolumeHeader> hp;
  std::optional<io::VolumeHeader> hg;
  const auto pred = io::read_class_values(a.pred, &hp);
  const auto gt = io::read_class_values(a.gt, &hg);
  if (hp && hg && hp->dims != hg->dims) {
    throw Error(Errc::kDimMismatch, "prediction and ground truth dims differ");
  }
  const auto mask = unknown_mask(gt, kIgnoreClass);
  const MetricsReport m = compute_metrics(pred, gt, mask, a.classes);
  const std::string text = metrics_json(m).dump(2) + "\n";
  if (a.out.empty()) {
    log << text;
  } else {
    write_text(a.out, text);
    log << "iou " << m.iou << ", miou " << m.miou << '\n';
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct ForwardArgs {
  std::string config;
  std::string scene = "street";
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string calib;
};

inline json forward_report(const PipelineConfig& cfg, const std::string& scene,
                           const ForwardResult& r) {
  json stages = json::array();
  for (const auto& s : r.stages) {
    stages.push_back(
        {{"name", s.name}, {"seconds", s.seconds}, {"nonempty", s.nonempty}, {"shape", s.shape}});
  }
  const auto d4 = r.o4.dims;
  const auto d1 = r.pred1.dims();
  return {{"scene", scene},
          {"seed", cfg.seed},
          {"tau1", cfg.tau1},
          {"tau2", cfg.tau2},
          {"scorer", cfg.scorer},
          {"stages", stages},
          {"semi_fine", r.sets.semi_fine.size()},
          {"fine", r.sets.fine.size()},
          {"fusion_misses", r.fusion_misses},
          {"residual_identity", r.residual_identity},
          {"hvfr_seconds", r.hvfr_seconds},
          {"o4", {{"dims", {d4[0], d4[1], d4[2]}}, {"channels", r.o4.channels}}},
          {"o1",
           {{"dims", {d1[0], d1[1], d1[2]}},
            {"channels", r.o1.channels()},
            {"nonempty", r.o1.size()}}}};
}

/// Argmax class per scale-4 voxel whose predicted occlusion is not Empty.
inline SemanticVolume o4_classes(const VoxelTensor& o4) {
  SemanticVolume vol(o4.dims, kEmptyClass);
  for (std::size_t v = 0; v < o4.num_voxels(); ++v) {
    const auto logits = o4.at(v);
    if (predicted_occlusion(logits) == OcclusionLabel::kEmpty) continue;
    const auto sem = logits.first(kSemanticChannels);
    vol.data()[v] =
        static_cast<std::uint16_t>(std::max_element(sem.begin(), sem.end()) - sem.begin());
  }
  return vol;
}

inline int forward(const ForwardArgs& a, std::ostream& log) {
  PipelineConfig cfg = config_or_default(a.config);
  if (a.seed) cfg.seed = *a.seed;
  cfg.validate();
  const fs::path out = a.out.empty() ? fs::path(cfg.output_dir) : fs::path(a.out);

  FrameInput in;
  std::optional<SyntheticScene> scene;
  if (a.scene.size() > 4 && a.scene.ends_with(".bin")) {
    if (a.calib.empty()) {
      throw Error(Errc::kConfigError, "a velodyne scan needs --calib for its camera");
    }
    in.cloud = io::read_velodyne(a.scene);
    in.rig = {io::camera_from_calib(io::read_kitti_calib(a.calib))};
    // No images ship with a scan; the camera branch sees a blank frame.
    in.images.images.emplace_back(in.rig[0].width, in.rig[0].height, cfg.image_channels);
    if (cfg.scorer == "oracle") {
      throw Error(Errc::kConfigError, "the oracle scorer needs a synthetic scene");
    }
  } else {
    scene = build_scene(
        named_scene_spec(a.scene, cfg.geometry, cfg.seed_for("scene"), cfg.image_channels));
    in.cloud = scene->cloud;
    in.rig = scene->rig();
    in.images = scene->images;
    in.gt = &scene->gt;
  }

  const auto t0 = std::chrono::steady_clock::now();
  const ForwardResult r = run_forward(cfg, in);
  const double total = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  log << std::left << std::setw(18) << "stage" << std::right << std::setw(12) << "seconds"
      << std::setw(12) << "nonempty" << "  shape\n";
  for (const auto& s : r.stages) {
    log << std::left << std::setw(18) << s.name << std::right << std::setw(12) << std::fixed
        << std::setprecision(6) << s.seconds << std::setw(12) << s.nonempty << "  " << s.shape
        << '\n';
  }
  log.unsetf(std::ios::fixed);
  log << "total " << total << " s\n";
  log << "refinement: S=" << r.sets.semi_fine.size() << " F=" << r.sets.fine.size()
      << ", F_E^4 == F_M^4: " << (r.residual_identity ? "yes" : "no") << '\n';
  log << "O^4 " << detail::dims_string(r.o4.dims, r.o4.channels) << ", O^1 "
      << detail::dims_string(r.pred1.dims(), r.o1.channels()) << " (" << r.o1.size()
      << " non-empty)\n";

  const GridGeometry geom1 = cfg.geometry.at_scale(1);
  io::write_class_volume(out / "pred_scale1.label", r.pred1, geom1, cfg.seed);
  io::write_class_volume(out / "pred_scale4.label", o4_classes(r.o4), geom1.at_scale(4),
                         cfg.seed);
  if (scene) io::write_class_volume(out / "gt.label", scene->gt, geom1, cfg.seed);
  write_text(out / "report.json", forward_report(cfg, a.scene, r).dump(2) + "\n");
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct BenchArgs {
  std::string config;
  std::vector<int> sizes = {1, 2};
  int repeats = 3;
  std::string scene = "street";
  std::string out;
};

inline int bench(const BenchArgs& a, std::ostream& log) {
  const PipelineConfig cfg = config_or_default(a.config);
  const auto rows = run_bench(cfg, a.sizes, a.repeats, a.scene);
  if (a.out.empty()) {
    write_bench_csv(log, rows);
  } else {
    std::ostringstream csv;
    write_bench_csv(csv, rows);
    write_text(a.out, csv.str());
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout,
               std::ostream& err = std::cerr) {
  CLI::App app{"mrvox: sparse multi-resolution voxel occupancy toolkit"};
  app.require_subcommand(1);

  LabelGenArgs lg;
  auto* cmd_lg = app.add_subcommand("label-gen", "ray-cast occlusion labels for a sequence");
  cmd_lg->add_option("--dataset", lg.dataset, "semantickitti or synthetic")->capture_default_str();
  cmd_lg->add_option("--sequence", lg.sequence,
                     "sequence id, or scene name (street|wall|empty) for synthetic")
      ->capture_default_str();
  cmd_lg->add_option("--out", lg.out, "output directory")->required();
  cmd_lg->add_option("--stride", lg.stride, "camera pixel stride");
  cmd_lg->add_option("--root", lg.root, std::string("dataset root (default $") + kDatasetRootEnv + ")");
  cmd_lg->add_option("--config", lg.config, "pipeline config file");
  cmd_lg->add_option("--seed", lg.seed, "root seed");

  EvalArgs ev;
  auto* cmd_ev = app.add_subcommand("eval", "IoU and mIoU of a prediction");
  cmd_ev->add_option("--pred", ev.pred, "predicted class volume")->required();
  cmd_ev->add_option("--gt", ev.gt, "ground-truth class volume")->required();
  cmd_ev->add_option("--classes", ev.classes, "number of classes including empty")
      ->capture_default_str();
  cmd_ev->add_option("--out", ev.out, "report path (default stdout)");

  ForwardArgs fw;
  auto* cmd_fw = app.add_subcommand("forward", "run the full pipeline on one frame");
  cmd_fw->add_option("--config", fw.config, "pipeline config file");
  cmd_fw->add_option("--scene", fw.scene, "street|wall|empty, or a velodyne .bin")
      ->capture_default_str();
  cmd_fw->add_option("--seed", fw.seed, "root seed (overrides the config)");
  cmd_fw->add_option("--out", fw.out, "output directory (default from config)");
  cmd_fw->add_option("--calib", fw.calib, "KITTI calib.txt for a .bin scene");

  BenchArgs bn;
  auto* cmd_bn = app.add_subcommand("bench", "stage timings against lattice size");
  cmd_bn->add_option("--config", bn.config, "pipeline config file");
  cmd_bn->add_option("--sizes", bn.sizes, "per-axis lattice multipliers")
      ->delimiter(',')
      ->capture_default_str();
  cmd_bn->add_option("--repeats", bn.repeats, "runs per size")->capture_default_str();
  cmd_bn->add_option("--scene", bn.scene, "synthetic scene")->capture_default_str();
  cmd_bn->add_option("--out", bn.out, "CSV path (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*cmd_lg) return label_gen(lg, out);
    if (*cmd_ev) return eval(ev, out);
    if (*cmd_fw) return forward(fw, out);
    if (*cmd_bn) return bench(bn, out);
  } catch (const Error& e) {
    err << "mrvox: " << e.what() << '\n';
    return exit_code(e.code());
  } catch (const fs::filesystem_error& e) {
    err << "mrvox: " << e.what() << '\n';
    return kExitNotFound;
  }
  return kExitConfig;
}

}  // namespace mrvox::cli

#endif  // MRVOX_CLI_HPP
