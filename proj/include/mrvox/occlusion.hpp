// Copyright 2026 The mrvox Authors
// SPDX-License-Identifier: Apache-2.0
//
// Occlusion-aware ground truth.
//
// Rays are cast through the labeled volume from the LiDAR origin (one per
// point) and from every camera center (one per sampled pixel). Along a ray,
// the voxel where the sensor first observes the scene is NonOccluded, and
// every labeled voxel behind it is Occluded. Per modality, labels from many
// rays merge by priority NonOccluded > Occluded > Empty. The two modalities
// then combine:
//
//   lidar \ camera | Empty   NonOcc  Occ
//   ---------------+-----------------------
//   Empty          | Empty   NonOcc  Empty
//   NonOcc         | NonOcc  NonOcc  NonOcc
//   Occ            | Empty   NonOcc  Occ
//
// Voxels that are empty in the ground truth are always Empty.

#ifndef MRVOX_OCCLUSION_HPP
#define MRVOX_OCCLUSION_HPP

#include <Eigen/Core>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "mrvox/camera.hpp"
#include "mrvox/error.hpp"
#include "mrvox/lidar.hpp"
#include "mrvox/voxel_core.hpp"

namespace mrvox {

enum class OcclusionLabel : std::uint8_t {
  kEmpty = 0,
  kNonOccluded = 1,
  kOccluded = 2,
};

inline constexpr std::uint16_t kEmptyClass = 0;
inline constexpr std::uint16_t kIgnoreClass = 255;

/// Semantic ground truth: class id per voxel, 0 = empty, 255 = unknown.
using SemanticVolume = DenseVolume<std::uint16_t>;
using OcclusionGrid = DenseVolume<OcclusionLabel>;

inline bool is_labeled(std::uint16_t cls) {
  return cls != kEmptyClass && cls != kIgnoreClass;
}

/// Rank used when several rays label the same voxel within one modality.
constexpr int merge_priority(OcclusionLabel l) {
  switch (l) {
    case OcclusionLabel::kEmpty: return 0;
    case OcclusionLabel::kOccluded: return 1;
    case OcclusionLabel::kNonOccluded: return 2;
  }
  return 0;
}

constexpr OcclusionLabel merge(OcclusionLabel a, OcclusionLabel b) {
  return merge_priority(a) >= merge_priority(b) ? a : b;
}

/// Cross-modality rule: NonOccluded if either says so, Occluded only if both
/// agree, Empty otherwise.
constexpr OcclusionLabel combine(OcclusionLabel lidar, OcclusionLabel camera) {
  if (lidar == OcclusionLabel::kNonOccluded ||
      camera == OcclusionLabel::kNonOccluded) {
    return OcclusionLabel::kNonOccluded;
  }
  if (lidar == OcclusionLabel::kOccluded && camera == OcclusionLabel::kOccluded) {
    return OcclusionLabel::kOccluded;
  }
  return OcclusionLabel::kEmpty;
}

/// Amanatides-Woo traversal of the segment origin -> target (extended by
/// `margin` meters past the target) through the lattice at geom.scale.
/// Returns every cell the segment passes through, in order of entry, each
/// once. Segments that miss the lattice yield an empty list.
inline std::vector<VoxelIndex> traverse(const Eigen::Vector3d& origin,
                                        const Eigen::Vector3d& target,
                                        const GridGeometry& geom,
                                        double margin = 0.0) {
  std::vector<VoxelIndex> out;
  const double size = geom.cell_size();
  const auto dims = geom.dims();
  // Work in cell units: the lattice is [0, dims) on every axis.
  const Eigen::Vector3d a = (origin - geom.origin) / size;
  Eigen::Vector3d b = (target - geom.origin) / size;
  Eigen::Vector3d dir = b - a;
  const double len = dir.norm();
  if (!(len > 0.0) || !std::isfinite(len)) {
    if (const auto v = world_to_voxel(origin, geom)) out.push_back(*v);
    return out;
  }
  const double t_end = 1.0 + margin / (len * size);

  // Clip [0, t_end] against the lattice box.
  double t0 = 0.0;
  double t1 = t_end;
  for (int k = 0; k < 3; ++k) {
    if (dir[k] == 0.0) {
      if (a[k] < 0.0 || a[k] >= dims[k]) return out;
      continue;
    }
    double ta = (0.0 - a[k]) / dir[k];
    double tb = (dims[k] - a[k]) / dir[k];
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
  }
  if (!(t0 < t1)) return out;

  const Eigen::Vector3d start = a + t0 * dir;
  std::array<int, 3> cell{};
  std::array<int, 3> step{};
  std::array<double, 3> t_max{};
  std::array<double, 3> t_delta{};
  for (int k = 0; k < 3; ++k) {
    int c = static_cast<int>(std::floor(start[k]));
    // On a face while moving down the axis: the segment continues in the
    // lower cell.
    if (dir[k] < 0.0 && start[k] == std::floor(start[k])) c -= 1;
    cell[k] = std::clamp(c, 0, dims[k] - 1);
    if (dir[k] > 0.0) {
      step[k] = 1;
      t_max[k] = (cell[k] + 1 - a[k]) / dir[k];
      t_delta[k] = 1.0 / dir[k];
    } else if (dir[k] < 0.0) {
      step[k] = -1;
      t_max[k] = (cell[k] - a[k]) / dir[k];
      t_delta[k] = -1.0 / dir[k];
    } else {
      step[k] = 0;
      t_max[k] = std::numeric_limits<double>::infinity();
      t_delta[k] = std::numeric_limits<double>::infinity();
    }
  }

  while (true) {
    out.push_back({cell[0], cell[1], cell[2], geom.scale});
    int axis = 0;
    if (t_max[1] < t_max[axis]) axis = 1;
    if (t_max[2] < t_max[axis]) axis = 2;
    if (t_max[axis] >= t1) break;
    cell[axis] += step[axis];
    if (cell[axis] < 0 || cell[axis] >= dims[axis]) break;
    t_max[axis] += t_delta[axis];
  }
  return out;
}

/// Full lattice diagonal in meters; the default behind-hit margin.
inline double grid_diagonal(const GridGeometry& geom) {
  return (geom.upper_corner() - geom.origin).norm();
}

namespace detail {

inline void mark(OcclusionGrid& labels, const VoxelIndex& v, OcclusionLabel l) {
  auto& cell = labels.at(v);
  cell = merge(cell, l);
}

/// ray[hit] is where the sensor observes the scene: it becomes NonOccluded
/// and every labeled voxel after it becomes Occluded.
inline void label_ray(std::span<const VoxelIndex> ray,
                      const SemanticVolume& gt, OcclusionGrid& labels,
                      std::size_t hit) {
  for (std::size_t i = hit + 1; i < ray.size(); ++i) {
    if (is_labeled(gt.at(ray[i]))) mark(labels, ray[i], OcclusionLabel::kOccluded);
  }
  mark(labels, ray[hit], OcclusionLabel::kNonOccluded);
}

}  // namespace detail

/// Clears every voxel that is empty or unknown in the ground truth.
inline void mask_unlabeled(const SemanticVolume& gt, OcclusionGrid& labels) {
  for (std::size_t i = 0; i < gt.size(); ++i) {
    if (!is_labeled(gt.data()[i])) labels.data()[i] = OcclusionLabel::kEmpty;
  }
}

/// LiDAR modality. Each point's voxel is NonOccluded; labeled voxels behind
/// it on the sensor ray (out to one grid diagonal) are Occluded.
inline OcclusionGrid label_lidar(const PointCloud& pc, const SemanticVolume& gt,
                                 const GridGeometry& geom) {
  if (gt.dims() != geom.dims()) {
    throw Error(Errc::kDimMismatch, "ground truth dims differ from geometry");
  }
  OcclusionGrid labels(geom.dims(), OcclusionLabel::kEmpty);
  const double margin = grid_diagonal(geom);
  for (const auto& p : pc.points) {
    const auto hit_voxel = world_to_voxel(p.position, geom);
    if (!hit_voxel) continue;
    const auto ray = traverse(pc.sensor_origin, p.position, geom, margin);
    const auto it = std::find(ray.begin(), ray.end(), *hit_voxel);
    if (it == ray.end()) {
      // Rounding can leave the endpoint cell off the walk; still observed.
      detail::mark(labels, *hit_voxel, OcclusionLabel::kNonOccluded);
      continue;
    }
    detail::label_ray(ray, gt, labels,
                      static_cast<std::size_t>(it - ray.begin()));
  }
  mask_unlabeled(gt, labels);
  return labels;
}

/// Camera modality. One ray per `stride`-th pixel (both axes) from the
/// camera center to beyond the far side of the lattice; the first labeled
/// voxel is NonOccluded, later labeled voxels are Occluded.
inline OcclusionGrid label_camera(const CameraRig& rig, const SemanticVolume& gt,
                                  const GridGeometry& geom, int stride = 4) {
  if (rig.empty()) {
    throw Error(Errc::kEmptyInput, "camera labeling needs at least one camera");
  }
  if (stride <= 0) {
    throw Error(Errc::kConfigError, "pixel stride must be positive");
  }
  if (gt.dims() != geom.dims()) {
    throw Error(Errc::kDimMismatch, "ground truth dims differ from geometry");
  }
  OcclusionGrid labels(geom.dims(), OcclusionLabel::kEmpty);
  const Eigen::Vector3d lo = geom.origin;
  const Eigen::Vector3d hi = geom.upper_corner();
  const double diag = grid_diagonal(geom);
  for (const auto& cam : rig) {
    const Eigen::Vector3d c = cam.center();
    // Far enough to leave the lattice from anywhere the camera can sit.
    const Eigen::Vector3d mid = 0.5 * (lo + hi);
    const double reach = (c - mid).norm() + diag;
    for (int v = 0; v < cam.height; v += stride) {
      for (int u = 0; u < cam.width; u += stride) {
        const Eigen::Vector3d dir = pixel_ray(cam, u, v);
        const auto ray = traverse(c + kNearPlane * dir, c + reach * dir, geom);
        std::size_t first = ray.size();
        for (std::size_t i = 0; i < ray.size(); ++i) {
          if (is_labeled(gt.at(ray[i]))) {
            first = i;
            break;
          }
        }
        if (first == ray.size()) continue;
        detail::label_ray(ray, gt, labels, first);
      }
    }
  }
  mask_unlabeled(gt, labels);
  return labels;
}

inline OcclusionGrid combine(const OcclusionGrid& lidar,
                             const OcclusionGrid& camera) {
  if (lidar.dims() != camera.dims()) {
    throw Error(Errc::kDimMismatch, "modality volumes differ in shape");
  }
  OcclusionGrid out(lidar.dims(), OcclusionLabel::kEmpty);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out.data()[i] = combine(lidar.data()[i], camera.data()[i]);
  }
  return out;
}

/// Semantic classes and occlusion state on one lattice.
struct OcclusionVolume {
  GridGeometry geometry;
  SemanticVolume semantic;
  OcclusionGrid occlusion;
};

struct LabelHistogram {
  std::size_t empty = 0;
  std::size_t non_occluded = 0;
  std::size_t occluded = 0;
};

inline LabelHistogram histogram(const OcclusionGrid& labels) {
  LabelHistogram h;
  for (const auto l : labels.data()) {
    switch (l) {
      case OcclusionLabel::kEmpty: ++h.empty; break;
      case OcclusionLabel::kNonOccluded: ++h.non_occluded; break;
      case OcclusionLabel::kOccluded: ++h.occluded; break;
    }
  }
  return h;
}

/// Both modalities, combined and masked. With an empty rig the LiDAR labels
/// are used as they are.
inline OcclusionVolume generate_occlusion_labels(const PointCloud& pc,
                                                 const CameraRig& rig,
                                                 const SemanticVolume& gt,
                                                 const GridGeometry& geom,
                                                 int stride = 4) {
  OcclusionVolume vol{geom, gt, label_lidar(pc, gt, geom)};
  if (!rig.empty()) {
    vol.occlusion = combine(vol.occlusion, label_camera(rig, gt, geom, stride));
  }
  mask_unlabeled(gt, vol.occlusion);
  return vol;
}

inline constexpr std::size_t kSemanticChannels = 18;
inline constexpr std::size_t kOcclusionChannels = 3;
inline constexpr std::size_t kOutputChannels =
    kSemanticChannels + kOcclusionChannels;

/// Dense per-voxel channel tensor, x slowest, channels fastest.
struct VoxelTensor {
  std::array<int, 3> dims = {0, 0, 0};
  int scale = 1;
  std::size_t channels = 0;
  std::vector<double> data;

  VoxelTensor() = default;
  VoxelTensor(std::array<int, 3> d, int s, std::size_t c, double fill = 0.0)
      : dims(d), scale(s), channels(c),
        data(static_cast<std::size_t>(d[0]) * d[1] * d[2] * c, fill) {}

  [[nodiscard]] std::size_t num_voxels() const {
    return static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
  }
  [[nodiscard]] std::size_t voxel(int x, int y, int z) const {
    return (static_cast<std::size_t>(x) * dims[1] + y) * dims[2] + z;
  }
  [[nodiscard]] std::span<double> at(std::size_t voxel) {
    return {data.data() + voxel * channels, channels};
  }
  [[nodiscard]] std::span<const double> at(std::size_t voxel) const {
    return {data.data() + voxel * channels, channels};
  }
  [[nodiscard]] VoxelIndex index_of(std::size_t voxel) const {
    const auto z = static_cast<std::int32_t>(voxel % dims[2]);
    const auto y = static_cast<std::int32_t>((voxel / dims[2]) % dims[1]);
    const auto x = static_cast<std::int32_t>(voxel / (static_cast<std::size_t>(dims[2]) * dims[1]));
    return {x, y, z, scale};
  }
};

/// Channel-wise concatenation: semantic channels first, then the occlusion
/// channels in OcclusionLabel order (empty, non-occluded, occluded).
inline VoxelTensor assemble_output(const VoxelTensor& semantic,
                                   const VoxelTensor& occlusion,
                                   std::size_t semantic_channels =
                                       kSemanticChannels) {
  if (semantic.channels != semantic_channels ||
      occlusion.channels != kOcclusionChannels) {
    throw Error(Errc::kShapeError,
                "expected " + std::to_string(semantic_channels) + " + " +
                    std::to_string(kOcclusionChannels) + " channels, got " +
                    std::to_string(semantic.channels) + " + " +
                    std::to_string(occlusion.channels));
  }
  if (semantic.dims != occlusion.dims || semantic.scale != occlusion.scale) {
    throw Error(Errc::kShapeError, "semantic and occlusion volumes differ");
  }
  VoxelTensor out(semantic.dims, semantic.scale,
                  semantic.channels + occlusion.channels);
  for (std::size_t v = 0; v < out.num_voxels(); ++v) {
    auto dst = out.at(v);
    const auto s = semantic.at(v);
    const auto o = occlusion.at(v);
    std::copy(s.begin(), s.end(), dst.begin());
    std::copy(o.begin(), o.end(), dst.begin() + static_cast<std::ptrdiff_t>(s.size()));
  }
  return out;
}

/// Occlusion state predicted for a voxel of an assembled output tensor
/// (argmax over the trailing three channels, first maximum wins).
inline OcclusionLabel predicted_occlusion(std::span<const double> logits) {
  const auto occ = logits.subspan(logits.size() - kOcclusionChannels);
  const auto best = std::max_element(occ.begin(), occ.end()) - occ.begin();
  return static_cast<OcclusionLabel>(best);
}

/// Voxels the fine decoder processes: predicted NonOccluded or Occluded.
inline std::vector<VoxelIndex> decoder_input(const VoxelTensor& output) {
  std::vector<VoxelIndex> out;
  for (std::size_t v = 0; v < output.num_voxels(); ++v) {
    if (predicted_occlusion(output.at(v)) != OcclusionLabel::kEmpty) {
      out.push_back(output.index_of(v));
    }
  }
  return out;
}

/// Scale-s occlusion labels from scale-1 labels by priority merge over each
/// block of children.
inline OcclusionGrid downsample_labels(const OcclusionGrid& labels, int factor) {
  const auto d = labels.dims();
  const std::array<int, 3> out_dims = {(d[0] + factor - 1) / factor,
                                       (d[1] + factor - 1) / factor,
                                       (d[2] + factor - 1) / factor};
  OcclusionGrid out(out_dims, OcclusionLabel::kEmpty);
  for (int x = 0; x < d[0]; ++x) {
    for (int y = 0; y < d[1]; ++y) {
      for (int z = 0; z < d[2]; ++z) {
        auto& cell = out.at(x / factor, y / factor, z / factor);
        cell = merge(cell, labels.at(x, y, z));
      }
    }
  }
  return out;
}

}  // namespace mrvox

#endif  // MRVOX_OCCLUSION_HPP
