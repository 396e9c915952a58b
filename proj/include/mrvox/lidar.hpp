// Copyright 2026 The mrvox Authors
// SPDX-License-Identifier: Apache-2.0
//
// LiDAR ingestion: point clouds, voxelization into the scale-1 feature grid,
// multi-scale downsampling, and the gather/multiply/accumulate sparse
// convolution used throughout the refinement stages.

#ifndef MRVOX_LIDAR_HPP
#define MRVOX_LIDAR_HPP

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "mrvox/error.hpp"
#include "mrvox/random.hpp"
#include "mrvox/voxel_core.hpp"

namespace mrvox {

struct LidarPoint {
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  double intensity = 0.0;  // [0, 1]
};

struct PointCloud {
  std::vector<LidarPoint> points;
  Eigen::Vector3d sensor_origin = Eigen::Vector3d::Zero();
};

/// Number of hand-crafted channels written by voxelize(); the rest of the
/// feature vector is zero padding.
inline constexpr std::size_t kVoxelizeChannels = 5;

struct VoxelizeResult {
  SparseVoxelGrid grid;
  std::size_t discarded = 0;  // points outside the lattice
};

/// One voxel per occupied scale-1 cell with feature
///   [count / max_count, mean intensity, mean offset from center (3), 0...]
/// where the offset is expressed in cell units, so it lies in [-0.5, 0.5).
inline VoxelizeResult voxelize(const PointCloud& pc, const GridGeometry& geom,
                               std::size_t channels = 16) {
  if (geom.scale != 1) {
    throw Error(Errc::kInvalidScale, "voxelize requires a scale-1 geometry");
  }
  if (channels < kVoxelizeChannels) {
    throw Error(Errc::kShapeError, "voxelize needs at least 5 channels");
  }
  if (pc.points.empty()) {
    throw Error(Errc::kEmptyInput, "empty point cloud");
  }

  struct Accum {
    std::size_t count = 0;
    double intensity = 0.0;
    Eigen::Vector3d offset = Eigen::Vector3d::Zero();
  };
  // Cells come out sorted; points within a cell are summed in sorted order.
  std::map<VoxelIndex, std::vector<std::size_t>> cells;
  VoxelizeResult result{SparseVoxelGrid(geom, channels), 0};
  for (std::size_t i = 0; i < pc.points.size(); ++i) {
    const auto v = world_to_voxel(pc.points[i].position, geom);
    if (!v) {
      ++result.discarded;
      continue;
    }
    cells[*v].push_back(i);
  }

  std::size_t max_count = 0;
  for (const auto& [v, ids] : cells) max_count = std::max(max_count, ids.size());

  result.grid.reserve(cells.size());
  std::vector<double> feature(channels, 0.0);
  for (auto& [v, ids] : cells) {
    // Sum in a canonical order so the result is permutation invariant.
    std::sort(ids.begin(), ids.end(), [&pc](std::size_t a, std::size_t b) {
      const auto& pa = pc.points[a];
      const auto& pb = pc.points[b];
      for (int k = 0; k < 3; ++k) {
        if (pa.position[k] != pb.position[k]) {
          return pa.position[k] < pb.position[k];
        }
      }
      return pa.intensity < pb.intensity;
    });
    Accum acc;
    const Eigen::Vector3d center = voxel_center(v, geom);
    for (std::size_t id : ids) {
      ++acc.count;
      acc.intensity += pc.points[id].intensity;
      acc.offset += (pc.points[id].position - center) / geom.voxel_size;
    }
    const double n = static_cast<double>(acc.count);
    std::fill(feature.begin(), feature.end(), 0.0);
    feature[0] = n / static_cast<double>(max_count);
    feature[1] = acc.intensity / n;
    feature[2] = acc.offset.x() / n;
    feature[3] = acc.offset.y() / n;
    feature[4] = acc.offset.z() / n;
    result.grid.insert(v, feature);
  }
  return result;
}

enum class ConvMode {
  kSubmanifold,  // output set = input set
  kExpanding,    // output set = input set dilated by the kernel footprint
};

/// Weights for a 3D sparse convolution.
///
/// stride 1: odd kernel_extent, taps at offsets -r..r around the output cell.
/// stride 2: kernel_extent 2, taps are the 8 children {0,1}^3 of the output
///           cell at the next finer scale; the output set is the set of
///           parents of the input set (mode is ignored).
///
/// Weight layout: [tap][out][in] with taps ordered lexicographically (z
/// fastest).
struct SparseConvSpec {
  int kernel_extent = 3;
  int stride = 1;
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  ConvMode mode = ConvMode::kSubmanifold;
  std::vector<double> weights;
  std::vector<double> bias;
  std::uint64_t seed = 0;

  [[nodiscard]] std::size_t num_taps() const {
    return static_cast<std::size_t>(kernel_extent) * kernel_extent *
           kernel_extent;
  }

  [[nodiscard]] double weight(std::size_t tap, std::size_t out,
                              std::size_t in) const {
    return weights[(tap * out_channels + out) * in_channels + in];
  }
  double& weight(std::size_t tap, std::size_t out, std::size_t in) {
    return weights[(tap * out_channels + out) * in_channels + in];
  }

  /// Tap offset relative to the output cell (stride 1) or to 2 * output cell
  /// (stride 2).
  [[nodiscard]] std::array<int, 3> tap_offset(std::size_t tap) const {
    const int e = kernel_extent;
    const int t = static_cast<int>(tap);
    const int lo = stride == 1 ? -(e / 2) : 0;
    return {t / (e * e) + lo, (t / e) % e + lo, t % e + lo};
  }

  void validate() const {
    if (stride != 1 && stride != 2) {
      throw Error(Errc::kShapeError, "stride must be 1 or 2");
    }
    if (stride == 1 && (kernel_extent < 1 || kernel_extent % 2 == 0)) {
      throw Error(Errc::kShapeError, "stride-1 kernels need an odd extent");
    }
    if (stride == 2 && kernel_extent != 2) {
      throw Error(Errc::kShapeError, "stride-2 kernels have extent 2");
    }
    if (weights.size() != num_taps() * in_channels * out_channels ||
        bias.size() != out_channels) {
      throw Error(Errc::kShapeError, "weight tensor shape mismatch");
    }
  }

  static SparseConvSpec zeros(int extent, int stride, std::size_t in,
                              std::size_t out,
                              ConvMode mode = ConvMode::kSubmanifold) {
    SparseConvSpec s;
    s.kernel_extent = extent;
    s.stride = stride;
    s.in_channels = in;
    s.out_channels = out;
    s.mode = mode;
    s.weights.assign(s.num_taps() * in * out, 0.0);
    s.bias.assign(out, 0.0);
    s.validate();
    return s;
  }

  /// Uniform(-a, a) weights with a = 1 / sqrt(fan_in); zero bias.
  static SparseConvSpec seeded(int extent, int stride, std::size_t in,
                               std::size_t out, std::uint64_t seed,
                               ConvMode mode = ConvMode::kSubmanifold) {
    SparseConvSpec s = zeros(extent, stride, in, out, mode);
    s.seed = seed;
    Rng rng(seed);
    const double a = 1.0 / std::sqrt(static_cast<double>(s.num_taps() * in));
    for (double& w : s.weights) w = rng.uniform(-a, a);
    return s;
  }

  /// Center tap = identity, all other taps zero (stride 1 only).
  static SparseConvSpec identity(int extent, std::size_t channels,
                                 ConvMode mode = ConvMode::kSubmanifold) {
    SparseConvSpec s = zeros(extent, 1, channels, channels, mode);
    const std::size_t center = s.num_taps() / 2;
    for (std::size_t c = 0; c < channels; ++c) s.weight(center, c, c) = 1.0;
    return s;
  }
};

namespace detail {

inline void accumulate_tap(const SparseConvSpec& spec, std::size_t tap,
                           std::span<const double> in, std::span<double> out) {
  for (std::size_t o = 0; o < spec.out_channels; ++o) {
    const double* w = &spec.weights[(tap * spec.out_channels + o) *
                                    spec.in_channels];
    double acc = 0.0;
    for (std::size_t i = 0; i < spec.in_channels; ++i) acc += w[i] * in[i];
    out[o] += acc;
  }
}

}  // namespace detail

/// out[p] = bias + sum over taps k with a present input q(p, k) of
/// W[k] * in[q]. Inputs outside the grid count as zero. Output rows are
/// sorted lexicographically; accumulation runs in tap order.
inline SparseVoxelGrid sparse_conv(const SparseVoxelGrid& grid,
                                   const SparseConvSpec& spec) {
  spec.validate();
  if (spec.in_channels != grid.channels()) {
    throw Error(Errc::kShapeError,
                "conv expects " + std::to_string(spec.in_channels) +
                    " input channels, grid has " +
                    std::to_string(grid.channels()));
  }
  const GridGeometry& g = grid.geometry();

  if (spec.stride == 2) {
    const GridGeometry out_geom = g.at_scale(g.scale * 2);
    SparseVoxelGrid out(out_geom, spec.out_channels);
    for (const auto& v : grid.coords()) {
      out.find_or_insert(align_scale(v, out_geom.scale));
    }
    out.sort_lexicographic();
    for (std::size_t r = 0; r < out.size(); ++r) {
      const VoxelIndex p = out.coord(r);
      auto dst = out.row(r);
      std::copy(spec.bias.begin(), spec.bias.end(), dst.begin());
      for (std::size_t tap = 0; tap < spec.num_taps(); ++tap) {
        const auto o = spec.tap_offset(tap);
        const VoxelIndex q{2 * p.x + o[0], 2 * p.y + o[1], 2 * p.z + o[2],
                           g.scale};
        if (const auto src = grid.lookup(q)) {
          detail::accumulate_tap(spec, tap, grid.row(*src), dst);
        }
      }
    }
    return out;
  }

  SparseVoxelGrid out(g, spec.out_channels);
  if (spec.mode == ConvMode::kSubmanifold) {
    out.reserve(grid.size());
    for (const auto& v : grid.coords()) out.insert_zero(v);
  } else {
    for (const auto& v : grid.coords()) {
      for (std::size_t tap = 0; tap < spec.num_taps(); ++tap) {
        const auto o = spec.tap_offset(tap);
        const VoxelIndex q{v.x + o[0], v.y + o[1], v.z + o[2], g.scale};
        if (g.contains(q)) out.find_or_insert(q);
      }
    }
  }
  out.sort_lexicographic();
  for (std::size_t r = 0; r < out.size(); ++r) {
    const VoxelIndex p = out.coord(r);
    auto dst = out.row(r);
    std::copy(spec.bias.begin(), spec.bias.end(), dst.begin());
    for (std::size_t tap = 0; tap < spec.num_taps(); ++tap) {
      const auto o = spec.tap_offset(tap);
      const VoxelIndex q{p.x + o[0], p.y + o[1], p.z + o[2], g.scale};
      if (const auto src = grid.lookup(q)) {
        detail::accumulate_tap(spec, tap, grid.row(*src), dst);
      }
    }
  }
  return out;
}

/// Parent-wise mean of the non-empty children (factor 2).
inline SparseVoxelGrid downsample_mean(const SparseVoxelGrid& grid) {
  const GridGeometry out_geom = grid.geometry().at_scale(grid.scale() * 2);
  SparseVoxelGrid out(out_geom, grid.channels());
  for (const auto& v : grid.coords()) {
    out.find_or_insert(align_scale(v, out_geom.scale));
  }
  out.sort_lexicographic();
  std::vector<std::size_t> counts(out.size(), 0);
  std::vector<std::size_t> order(grid.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&grid](std::size_t a, std::size_t b) {
    return grid.coord(a) < grid.coord(b);
  });
  for (std::size_t r : order) {
    const auto dst = *out.lookup(align_scale(grid.coord(r), out_geom.scale));
    auto d = out.row(dst);
    const auto s = grid.row(r);
    for (std::size_t c = 0; c < d.size(); ++c) d[c] += s[c];
    ++counts[dst];
  }
  for (std::size_t r = 0; r < out.size(); ++r) {
    for (double& x : out.row(r)) x /= static_cast<double>(counts[r]);
  }
  return out;
}

/// Strided (factor 2) sparse convolution.
inline SparseVoxelGrid downsample(const SparseVoxelGrid& grid,
                                  const SparseConvSpec& spec) {
  if (spec.stride != 2) {
    throw Error(Errc::kShapeError, "downsample needs a stride-2 kernel");
  }
  return sparse_conv(grid, spec);
}

}  // namespace mrvox

#endif  // MRVOX_LIDAR_HPP
