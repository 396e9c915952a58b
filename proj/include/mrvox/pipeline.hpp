// Copyright 2026 The mrvox Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef MRVOX_PIPELINE_HPP
#define MRVOX_PIPELINE_HPP

#include <algorithm>
#include <array>
#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "mrvox/camera.hpp"
#include "mrvox/config.hpp"
#include "mrvox/densifier.hpp"
#include "mrvox/error.hpp"
#include "mrvox/fusion.hpp"
#include "mrvox/hvfr.hpp"
#include "mrvox/lidar.hpp"
#include "mrvox/linear.hpp"
#include "mrvox/occlusion.hpp"
#include "mrvox/voxel_core.hpp"

namespace mrvox {

/// Seeded stand-ins for every learned component. Widths: C for all voxel
/// features, C_I for images.
struct PipelineWeights {
  std::array<SparseConvSpec, 4> down;  // 1->2, 2->4, 4->8, 8->16
  DeformableAttnParams attention;
  SparseConvSpec rie;                  // C -> 1, 3^3
  LinearMap mix_semi;                  // C + C_I -> C
  LinearMap mix_fine;                  // C + C_I -> C
  SparseConvSpec sconv1;               // scale 1 -> 2
  SparseConvSpec sconv2;               // scale 2 -> 4
  LinearMap semantic_head;             // C -> 18
  LinearMap occlusion_head;            // C -> 3
  LinearMap decoder;                   // 21 + C -> 18

  static PipelineWeights seeded(const PipelineConfig& cfg) {
    const std::size_t c = cfg.channels;
    const std::size_t ci = cfg.image_channels;
    PipelineWeights w;
    const std::array<const char*, 4> names = {"down1", "down2", "down4", "down8"};
    for (std::size_t i = 0; i < names.size(); ++i) {
      w.down[i] = SparseConvSpec::seeded(2, 2, c, c, cfg.seed_for(names[i]));
    }
    w.attention = DeformableAttnParams::seeded(ci, c, cfg.n_ref, cfg.seed_for("attention"));
    w.rie = SparseConvSpec::seeded(3, 1, c, 1, cfg.seed_for("rie"));
    w.mix_semi = LinearMap::seeded(c + ci, c, cfg.seed_for("mix_semi"));
    w.mix_fine = LinearMap::seeded(c + ci, c, cfg.seed_for("mix_fine"));
    w.sconv1 = SparseConvSpec::seeded(2, 2, c, c, cfg.seed_for("sconv1"));
    w.sconv2 = SparseConvSpec::seeded(2, 2, c, c, cfg.seed_for("sconv2"));
    w.semantic_head = LinearMap::seeded(c, kSemanticChannels, cfg.seed_for("semantic_head"));
    w.occlusion_head = LinearMap::seeded(c, kOcclusionChannels, cfg.seed_for("occlusion_head"));
    w.decoder = LinearMap::seeded(kOutputChannels + c, kSemanticChannels,
                                  cfg.seed_for("decoder"));
    return w;
  }
};

struct StageStat {
  std::string name;
  double seconds = 0.0;
  std::size_t nonempty = 0;
  std::string shape;
};

/// One frame. The rig must hold at least one camera, each with a feature map.
struct FrameInput {
  PointCloud cloud;
  CameraRig rig;
  FeatureMap2D images;
  /// Needed only by the oracle importance scorer.
  const SemanticVolume* gt = nullptr;
};

struct ForwardResult {
  std::vector<StageStat> stages;
  std::map<int, SparseVoxelGrid> lidar;  // F_L^s
  SparseVoxelGrid dense4;                // densified F~_L^4
  SparseVoxelGrid fused4;                // F_M^4
  SparseVoxelGrid refined4;              // F_E^4
  RefinementSets sets;
  std::size_t fusion_misses = 0;
  std::size_t discarded_points = 0;
  bool residual_identity = false;        // F_E^4 == F_M^4 bit for bit
  VoxelTensor o4;                        // dims@4 x 21
  SparseVoxelGrid o1;                    // sparse, scale 1, 21 channels
  SemanticVolume pred1;                  // argmax class at scale 1
  double hvfr_seconds = 0.0;

  [[nodiscard]] const StageStat* stage(const std::string& name) const {
    for (const auto& s : stages) {
      if (s.name == name) return &s;
    }
    return nullptr;
  }
};

/// Fraction of the 64 scale-1 children that carry a class label.
inline double occupancy_fraction(const SemanticVolume& gt, const VoxelIndex& v4) {
  int n = 0;
  for (const auto& c : subdivide(v4, 4)) {
    if (gt.in_bounds(c.x, c.y, c.z) && is_labeled(gt.at(c))) ++n;
  }
  return n / 64.0;
}

namespace detail {

inline std::string dims_string(const std::array<int, 3>& d, std::size_t channels) {
  return std::to_string(d[0]) + "x" + std::to_string(d[1]) + "x" + std::to_string(d[2]) +
         "x" + std::to_string(channels);
}

class StageTimer {
 public:
  explicit StageTimer(std::vector<StageStat>& out) : out_(out) {}

  template <typename F>
  auto run(const std::string& name, F&& body) {
    const auto t0 = std::chrono::steady_clock::now();
    auto result = body();
    const auto t1 = std::chrono::steady_clock::now();
    out_.push_back({name, std::chrono::duration<double>(t1 - t0).count(), 0, ""});
    return result;
  }

  void annotate(std::size_t nonempty, std::string shape) {
    out_.back().nonempty = nonempty;
    out_.back().shape = std::move(shape);
  }

 private:
  std::vector<StageStat>& out_;
};

}  // namespace detail

/// voxelize -> multi-scale -> densify -> fuse -> HVFR -> O^4 -> decoder.
inline ForwardResult run_forward(const PipelineConfig& cfg, const PipelineWeights& w,
                                 const FrameInput& in) {
  cfg.validate();
  if (in.rig.empty() || in.images.images.size() != in.rig.size() ||
      in.images.channels() != cfg.image_channels) {
    throw Error(Errc::kShapeError, "forward needs one feature map of " +
                                       std::to_string(cfg.image_channels) +
                                       " channels per camera");
  }
  const GridGeometry geom1 = cfg.geometry.at_scale(1);
  const std::size_t c = cfg.channels;
  ForwardResult r;
  detail::StageTimer timer(r.stages);

  // LiDAR branch.
  r.lidar[1] = timer.run("voxelize", [&] {
    if (in.cloud.points.empty()) return SparseVoxelGrid(geom1, c);
    auto vr = voxelize(in.cloud, geom1, c);
    r.discarded_points = vr.discarded;
    vr.grid.sort_lexicographic();
    return std::move(vr.grid);
  });
  timer.annotate(r.lidar[1].size(), detail::dims_string(geom1.dims_at(1), c));
  const std::array<int, 4> coarse = {2, 4, 8, 16};
  for (std::size_t i = 0; i < coarse.size(); ++i) {
    const int s = coarse[i];
    r.lidar[s] = timer.run("downsample_" + std::to_string(s),
                           [&] { return downsample(r.lidar[s / 2], w.down[i]); });
    timer.annotate(r.lidar[s].size(), detail::dims_string(geom1.dims_at(s), c));
  }

  r.dense4 = timer.run("densify", [&] {
    MultiScaleFeatures ms;
    for (int s : kDensifyScales) ms.grids.emplace(s, r.lidar[s]);
    if (r.lidar[4].empty()) return SparseVoxelGrid(geom1.at_scale(4), c);
    return densify(ms);
  });
  timer.annotate(r.dense4.size(), detail::dims_string(geom1.dims_at(4), c));

  // Camera fusion.
  const QuerySet queries = guide_queries(r.dense4, cfg.seed_for("queries"));
  r.fused4 = timer.run("fuse", [&] {
    auto fr = fuse(queries, in.rig, in.images, w.attention);
    r.fusion_misses = fr.misses;
    return std::move(fr.fused);
  });
  timer.annotate(r.fused4.size(), detail::dims_string(geom1.dims_at(4), c));

  // HVFR.
  const auto hvfr_start = r.stages.size();
  const ImportanceMap importance = timer.run("importance", [&] {
    if (cfg.scorer == "oracle") {
      if (in.gt == nullptr) {
        throw Error(Errc::kConfigError, "oracle scorer needs ground truth");
      }
      const SemanticVolume& gt = *in.gt;
      return estimate_importance(
          r.fused4, [&gt](const VoxelIndex& v) { return occupancy_fraction(gt, v); });
    }
    return estimate_importance(r.fused4, w.rie);
  });
  timer.annotate(importance.size(), "");
  r.sets = timer.run("select", [&] { return select_sets(importance, cfg.tau1, cfg.tau2); });
  timer.annotate(r.sets.semi_fine.size() + r.sets.fine.size(),
                 "S=" + std::to_string(r.sets.semi_fine.size()) +
                     " F=" + std::to_string(r.sets.fine.size()));
  const SparseVoxelGrid semi2 = timer.run("gather_semi_fine", [&] {
    return gather_semi_fine(r.sets.semi_fine, r.lidar[2], in.rig, in.images, w.mix_semi);
  });
  timer.annotate(semi2.size(), detail::dims_string(geom1.dims_at(2), c));
  const SparseVoxelGrid fine1 = timer.run("gather_fine", [&] {
    return gather_fine(r.sets.fine, r.lidar[1], in.rig, in.images, w.mix_fine);
  });
  timer.annotate(fine1.size(), detail::dims_string(geom1.dims_at(1), c));
  r.refined4 = timer.run("refine", [&] {
    return fuse_refined(fine1, semi2, r.fused4, w.sconv1, w.sconv2);
  });
  timer.annotate(r.refined4.size(), detail::dims_string(geom1.dims_at(4), c));
  for (std::size_t i = hvfr_start; i < r.stages.size(); ++i) {
    r.hvfr_seconds += r.stages[i].seconds;
  }
  r.residual_identity = r.refined4 == r.fused4;

  // Heads and O^4.
  const auto dims4 = geom1.dims_at(4);
  r.o4 = timer.run("assemble_output", [&] {
    VoxelTensor sem(dims4, 4, kSemanticChannels);
    VoxelTensor occ(dims4, 4, kOcclusionChannels);
    for (std::size_t v = 0; v < occ.num_voxels(); ++v) occ.at(v)[0] = 1.0;
    for (std::size_t row = 0; row < r.refined4.size(); ++row) {
      const VoxelIndex& v = r.refined4.coord(row);
      const std::size_t flat = sem.voxel(v.x, v.y, v.z);
      w.semantic_head.apply(r.refined4.row(row), sem.at(flat));
      w.occlusion_head.apply(r.refined4.row(row), occ.at(flat));
    }
    return assemble_output(sem, occ);
  });
  const std::vector<VoxelIndex> active = decoder_input(r.o4);
  timer.annotate(active.size(), detail::dims_string(dims4, kOutputChannels));

  // Decoder: 64 scale-1 children per active voxel.
  r.o1 = timer.run("decoder", [&] {
    SparseVoxelGrid o1(geom1, kOutputChannels);
    o1.reserve(active.size() * 64);
    std::vector<double> x(kOutputChannels + c, 0.0);
    for (const auto& v4 : active) {
      const auto parent = r.o4.at(r.o4.voxel(v4.x, v4.y, v4.z));
      std::copy(parent.begin(), parent.end(), x.begin());
      for (const auto& child : subdivide(v4, 4)) {
        if (!geom1.contains(child)) continue;
        const auto lid = r.lidar[1].lookup(child);
        for (std::size_t k = 0; k < c; ++k) {
          x[kOutputChannels + k] = lid ? r.lidar[1].row(*lid)[k] : 0.0;
        }
        auto out = o1.row(o1.insert_zero(child));
        w.decoder.apply(x, out.first(kSemanticChannels));
        std::copy(parent.end() - kOcclusionChannels, parent.end(),
                  out.begin() + kSemanticChannels);
      }
    }
    return o1;
  });
  timer.annotate(r.o1.size(), detail::dims_string(geom1.dims_at(1), kOutputChannels));

  r.pred1 = SemanticVolume(geom1.dims_at(1), kEmptyClass);
  for (std::size_t row = 0; row < r.o1.size(); ++row) {
    const auto logits = r.o1.row(row).first(kSemanticChannels);
    const auto best = std::max_element(logits.begin(), logits.end()) - logits.begin();
    r.pred1.at(r.o1.coord(row)) = static_cast<std::uint16_t>(best);
  }
  return r;
}

inline ForwardResult run_forward(const PipelineConfig& cfg, const FrameInput& in) {
  return run_forward(cfg, PipelineWeights::seeded(cfg), in);
}

}  // namespace mrvox

#endif  // MRVOX_PIPELINE_HPP
