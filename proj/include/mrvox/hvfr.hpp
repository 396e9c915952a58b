// Copyright 2026 The mrvox Authors
// SPDX-License-Identifier: Apache-2.0
//
// Hierarchical voxel feature refinement.
//
// A per-voxel importance score R in [0, 1] is estimated on the fused scale-4
// grid. Voxels with R >= tau1 form the semi-fine set S and are split into 8
// scale-2 children; voxels with R >= tau2 form the fine set F and are split
// into 64 scale-1 children. Each child gathers the LiDAR feature at its own
// scale and the image feature at its projected center, and a 1x1 map mixes
// the concatenation. Two stride-2 sparse convolutions bring the refined
// children back to scale 4, where they are added to the fused features:
//
//   F_E = SConv2(SConv1(F_fine) + F_semi) + F_M
//
// Cost is proportional to |S| + |F|, never to the grid volume.

#ifndef MRVOX_HVFR_HPP
#define MRVOX_HVFR_HPP

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "mrvox/camera.hpp"
#include "mrvox/error.hpp"
#include "mrvox/lidar.hpp"
#include "mrvox/linear.hpp"
#include "mrvox/voxel_core.hpp"

namespace mrvox {

inline constexpr double kDefaultTau1 = 0.4;
inline constexpr double kDefaultTau2 = 0.7;

/// Scores aligned row-for-row with the coordinate set they were computed on.
struct ImportanceMap {
  std::vector<VoxelIndex> coords;
  std::vector<double> scores;

  [[nodiscard]] std::size_t size() const { return coords.size(); }
};

struct RefinementSets {
  std::vector<VoxelIndex> semi_fine;  // S
  std::vector<VoxelIndex> fine;       // F
  double tau1 = kDefaultTau1;
  double tau2 = kDefaultTau2;
};

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

/// R = sigmoid(conv(F_M)). `rie` must produce a single channel at stride 1.
inline ImportanceMap estimate_importance(const SparseVoxelGrid& fused,
                                         const SparseConvSpec& rie) {
  if (rie.out_channels != 1 || rie.stride != 1) {
    throw Error(Errc::kShapeError, "importance estimator is a 1-channel, "
                                   "stride-1 convolution");
  }
  SparseConvSpec submanifold = rie;
  submanifold.mode = ConvMode::kSubmanifold;
  const SparseVoxelGrid logits = sparse_conv(fused, submanifold);
  ImportanceMap map;
  map.coords.reserve(logits.size());
  map.scores.reserve(logits.size());
  for (std::size_t r = 0; r < logits.size(); ++r) {
    map.coords.push_back(logits.coord(r));
    map.scores.push_back(sigmoid(logits.row(r)[0]));
  }
  return map;
}

/// Substitute scorer (e.g. ground-truth occupancy fraction). Scores are
/// clamped to [0, 1].
inline ImportanceMap estimate_importance(
    const SparseVoxelGrid& fused,
    const std::function<double(const VoxelIndex&)>& scorer) {
  ImportanceMap map;
  map.coords = fused.coords();
  std::sort(map.coords.begin(), map.coords.end());
  map.scores.reserve(map.coords.size());
  for (const auto& v : map.coords) {
    map.scores.push_back(std::clamp(scorer(v), 0.0, 1.0));
  }
  return map;
}

/// S = {R >= tau1}, F = {R >= tau2}. Thresholds above 1 select nothing.
inline RefinementSets select_sets(const ImportanceMap& importance, double tau1,
                                  double tau2) {
  if (!(tau1 >= 0.0) || !(tau2 >= 0.0) || !std::isfinite(tau1) ||
      !std::isfinite(tau2)) {
    throw Error(Errc::kConfigError, "thresholds must be finite and >= 0");
  }
  RefinementSets sets;
  sets.tau1 = tau1;
  sets.tau2 = tau2;
  for (std::size_t i = 0; i < importance.size(); ++i) {
    const double r = importance.scores[i];
    if (r >= tau1) sets.semi_fine.push_back(importance.coords[i]);
    if (r >= tau2) sets.fine.push_back(importance.coords[i]);
  }
  return sets;
}

/// Children of every parent at scale parent/factor. Each child feature is
///   mix([lidar feature at the child or 0, image feature at its center])
/// where the image feature is the mean bilinear sample over the cameras that
/// see the child center (zero when none does).
inline SparseVoxelGrid gather_children(std::span<const VoxelIndex> parents,
                                       int factor,
                                       const SparseVoxelGrid& lidar,
                                       const CameraRig& rig,
                                       const FeatureMap2D& maps,
                                       const LinearMap& mix) {
  const std::size_t cl = lidar.channels();
  const std::size_t ci = maps.images.empty() ? 0 : maps.channels();
  if (mix.in_dim() != cl + ci) {
    throw Error(Errc::kShapeError,
                "1x1 map expects " + std::to_string(mix.in_dim()) +
                    " inputs, gather provides " + std::to_string(cl + ci));
  }
  if (maps.images.size() != rig.size()) {
    throw Error(Errc::kShapeError, "one feature map per camera required");
  }
  const GridGeometry& geom = lidar.geometry();
  SparseVoxelGrid out(geom, mix.out_dim());
  out.reserve(parents.size() * static_cast<std::size_t>(factor * factor * factor));

  std::vector<VoxelIndex> sorted(parents.begin(), parents.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> concat(cl + ci);
  std::vector<double> sample(ci);
  for (const VoxelIndex& parent : sorted) {
    if (parent.scale != geom.scale * factor) {
      throw Error(Errc::kShapeError,
                  "parent " + to_string(parent) + " does not refine into a "
                  "scale-" + std::to_string(geom.scale) + " grid by factor " +
                  std::to_string(factor));
    }
    for (const VoxelIndex& child : subdivide(parent, factor)) {
      if (!geom.contains(child)) continue;  // clipped at the upper grid faces
      std::fill(concat.begin(), concat.end(), 0.0);
      if (const auto r = lidar.lookup(child)) {
        const auto f = lidar.row(*r);
        std::copy(f.begin(), f.end(), concat.begin());
      }
      if (ci > 0) {
        const Eigen::Vector3d center = voxel_center(child, geom);
        std::size_t hits = 0;
        for (std::size_t cam = 0; cam < rig.size(); ++cam) {
          const auto hit = project(rig[cam], center);
          if (!hit) continue;
          bilinear_sample_into(maps.images[cam], hit->u, hit->v, sample);
          for (std::size_t k = 0; k < ci; ++k) concat[cl + k] += sample[k];
          ++hits;
        }
        if (hits > 1) {
          for (std::size_t k = 0; k < ci; ++k) {
            concat[cl + k] /= static_cast<double>(hits);
          }
        }
      }
      const std::size_t row = out.insert_zero(child);
      mix.apply(concat, out.row(row));
    }
  }
  return out;
}

/// F_S^2: 8 scale-2 children per semi-fine voxel.
inline SparseVoxelGrid gather_semi_fine(std::span<const VoxelIndex> semi_fine,
                                        const SparseVoxelGrid& lidar2,
                                        const CameraRig& rig,
                                        const FeatureMap2D& maps,
                                        const LinearMap& mix) {
  if (lidar2.scale() != 2) {
    throw Error(Errc::kShapeError, "semi-fine gather reads the scale-2 grid");
  }
  return gather_children(semi_fine, 2, lidar2, rig, maps, mix);
}

/// F_F^1: 64 scale-1 children per fine voxel.
inline SparseVoxelGrid gather_fine(std::span<const VoxelIndex> fine,
                                   const SparseVoxelGrid& lidar1,
                                   const CameraRig& rig,
                                   const FeatureMap2D& maps,
                                   const LinearMap& mix) {
  if (lidar1.scale() != 1) {
    throw Error(Errc::kShapeError, "fine gather reads the scale-1 grid");
  }
  return gather_children(fine, 4, lidar1, rig, maps, mix);
}

/// a + b over the union of their coordinates (missing rows read as zero).
inline SparseVoxelGrid add_union(const SparseVoxelGrid& a,
                                 const SparseVoxelGrid& b) {
  if (a.scale() != b.scale() || a.channels() != b.channels()) {
    throw Error(Errc::kShapeError, "cannot add grids of different shape");
  }
  SparseVoxelGrid out(a.geometry(), a.channels());
  out.reserve(a.size() + b.size());
  for (std::size_t r = 0; r < a.size(); ++r) out.insert(a.coord(r), a.row(r));
  for (std::size_t r = 0; r < b.size(); ++r) {
    auto dst = out.row(out.find_or_insert(b.coord(r)));
    const auto src = b.row(r);
    for (std::size_t c = 0; c < dst.size(); ++c) dst[c] += src[c];
  }
  out.sort_lexicographic();
  return out;
}

/// F_E^4 over the coordinate set of F_M^4. Refined contributions that land
/// outside that set are dropped.
inline SparseVoxelGrid fuse_refined(const SparseVoxelGrid& fine1,
                                    const SparseVoxelGrid& semi2,
                                    const SparseVoxelGrid& fused4,
                                    const SparseConvSpec& sconv1,
                                    const SparseConvSpec& sconv2) {
  if (fine1.scale() != 1 || semi2.scale() != 2 || fused4.scale() != 4) {
    throw Error(Errc::kShapeError, "refinement fusion expects scales 1, 2, 4");
  }
  if (sconv1.stride != 2 || sconv2.stride != 2) {
    throw Error(Errc::kShapeError, "refinement convolutions are stride 2");
  }
  if (sconv1.out_channels != semi2.channels() ||
      sconv2.out_channels != fused4.channels()) {
    throw Error(Errc::kShapeError, "refinement channel widths do not chain");
  }
  SparseVoxelGrid out = fused4;
  out.sort_lexicographic();
  if (fine1.empty() && semi2.empty()) return out;

  SparseVoxelGrid lifted =
      fine1.empty() ? SparseVoxelGrid(semi2.geometry(), semi2.channels())
                    : sparse_conv(fine1, sconv1);
  const SparseVoxelGrid merged = add_union(lifted, semi2);
  const SparseVoxelGrid refined = sparse_conv(merged, sconv2);
  for (std::size_t r = 0; r < refined.size(); ++r) {
    const auto dst = out.lookup(refined.coord(r));
    if (!dst) continue;
    auto d = out.row(*dst);
    const auto s = refined.row(r);
    for (std::size_t c = 0; c < d.size(); ++c) d[c] += s[c];
  }
  return out;
}

/// Importance-estimator targets: 1 iff any scale-1 child of the scale-4 voxel
/// is occupied according to `occupied(child)`.
inline std::vector<double> importance_targets(
    std::span<const VoxelIndex> coords4,
    const std::function<bool(const VoxelIndex&)>& occupied) {
  std::vector<double> targets;
  targets.reserve(coords4.size());
  for (const auto& v : coords4) {
    bool any = false;
    for (const auto& child : subdivide(v, 4)) {
      if (occupied(child)) {
        any = true;
        break;
      }
    }
    targets.push_back(any ? 1.0 : 0.0);
  }
  return targets;
}

}  // namespace mrvox

#endif  // MRVOX_HVFR_HPP
