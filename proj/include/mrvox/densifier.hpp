// Copyright 2026 The mrvox Authors
// SPDX-License-Identifier: Apache-2.0
//
// LiDAR densification: the non-empty voxels of the scale-4, 8 and 16 feature
// grids are re-indexed onto the scale-4 lattice and features that land on the
// same cell are averaged.

#ifndef MRVOX_DENSIFIER_HPP
#define MRVOX_DENSIFIER_HPP

#include <array>
#include <cstddef>
#include <algorithm>
#include <map>
#include <numeric>
#include <span>
#include <vector>

#include "mrvox/error.hpp"
#include "mrvox/voxel_core.hpp"

namespace mrvox {

inline constexpr std::array<int, 3> kDensifyScales = {4, 8, 16};

/// Sparse LiDAR features keyed by scale (4, 8, 16). Missing scales are
/// treated as empty.
struct MultiScaleFeatures {
  std::map<int, SparseVoxelGrid> grids;
};

enum class CoarseContribution {
  /// A coarse voxel contributes at its aligned anchor index only.
  kAnchor,
  /// A coarse voxel contributes to every scale-4 cell of its footprint.
  kFootprint,
};

inline SparseVoxelGrid densify(
    const MultiScaleFeatures& ms,
    CoarseContribution contribution = CoarseContribution::kAnchor) {
  const SparseVoxelGrid* reference = nullptr;
  std::size_t total = 0;
  for (int s : kDensifyScales) {
    const auto it = ms.grids.find(s);
    if (it == ms.grids.end()) continue;
    const SparseVoxelGrid& g = it->second;
    if (g.scale() != s) {
      throw Error(Errc::kInvalidScale, "grid keyed " + std::to_string(s) +
                                           " has scale " +
                                           std::to_string(g.scale()));
    }
    if (reference == nullptr) {
      reference = &g;
    } else {
      if (g.channels() != reference->channels()) {
        throw Error(Errc::kShapeError, "channel widths differ across scales");
      }
      if (g.geometry().origin != reference->geometry().origin ||
          g.geometry().dims_scale1 != reference->geometry().dims_scale1 ||
          g.geometry().voxel_size != reference->geometry().voxel_size) {
        throw Error(Errc::kShapeError, "scales do not share one lattice");
      }
    }
    total += g.size();
  }
  if (reference == nullptr || total == 0) {
    throw Error(Errc::kEmptyInput, "no non-empty voxels at any scale");
  }

  const GridGeometry geom4 = reference->geometry().at_scale(4);
  const std::size_t channels = reference->channels();
  SparseVoxelGrid out(geom4, channels);
  std::vector<std::size_t> counts;

  auto add = [&](const VoxelIndex& v4, std::span<const double> f) {
    const std::size_t r = out.find_or_insert(v4);
    if (r >= counts.size()) counts.resize(r + 1, 0);
    auto dst = out.row(r);
    for (std::size_t c = 0; c < channels; ++c) dst[c] += f[c];
    ++counts[r];
  };

  // Accumulate scale 4, then 8, then 16, each in sorted coordinate order, so
  // floating-point sums do not depend on input row order.
  for (int s : kDensifyScales) {
    const auto it = ms.grids.find(s);
    if (it == ms.grids.end()) continue;
    const SparseVoxelGrid& g = it->second;
    std::vector<std::size_t> order(g.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&g](std::size_t a, std::size_t b) {
      return g.coord(a) < g.coord(b);
    });
    for (std::size_t r : order) {
      const VoxelIndex anchor = align_scale(g.coord(r), 4);
      if (contribution == CoarseContribution::kAnchor || s == 4) {
        add(anchor, g.row(r));
        continue;
      }
      const int ratio = s / 4;
      for (int dx = 0; dx < ratio; ++dx) {
        for (int dy = 0; dy < ratio; ++dy) {
          for (int dz = 0; dz < ratio; ++dz) {
            const VoxelIndex v{anchor.x + dx, anchor.y + dy, anchor.z + dz, 4};
            if (geom4.contains(v)) add(v, g.row(r));
          }
        }
      }
    }
  }

  for (std::size_t r = 0; r < out.size(); ++r) {
    const double n = static_cast<double>(counts[r]);
    for (double& x : out.row(r)) x /= n;
  }
  out.sort_lexicographic();
  return out;
}

}  // namespace mrvox

#endif  // MRVOX_DENSIFIER_HPP
