// Copyright 2026 The mrvox Authors
// SPDX-License-Identifier: Apache-2.0
//
// Multi-scale voxel lattice: grid geometry, integer index algebra between
// scales, world <-> voxel transforms and the coordinate-indexed sparse
// feature grid used by every other stage.
//
// Scale s means cells s times the base edge length. Indices at scale s are
// obtained by flooring world coordinates, so a point lying exactly on a cell
// face belongs to the cell whose lower face it touches.

#ifndef MRVOX_VOXEL_CORE_HPP
#define MRVOX_VOXEL_CORE_HPP

#include <Eigen/Core>

#include <algorithm>
#include <array>
#include <cmath>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "mrvox/error.hpp"

namespace mrvox {

inline constexpr std::array<int, 5> kValidScales = {1, 2, 4, 8, 16};

constexpr bool is_valid_scale(int s) {
  return std::find(kValidScales.begin(), kValidScales.end(), s) !=
         kValidScales.end();
}

/// Integer voxel coordinate tagged with the scale it lives at.
struct VoxelIndex {
  std::int32_t x = 0;
  std::int32_t y = 0;
  std::int32_t z = 0;
  int scale = 1;

  // Lexicographic on (x, y, z) with z fastest; scale compared last.
  friend constexpr auto operator<=>(const VoxelIndex&,
                                    const VoxelIndex&) = default;
  friend constexpr bool operator==(const VoxelIndex&,
                                   const VoxelIndex&) = default;
};

inline std::string to_string(const VoxelIndex& v) {
  return "(" + std::to_string(v.x) + "," + std::to_string(v.y) + "," +
         std::to_string(v.z) + ")@" + std::to_string(v.scale);
}

struct GridGeometry {
  Eigen::Vector3d origin = Eigen::Vector3d::Zero();
  double voxel_size = 0.2;  // meters at scale 1
  std::array<int, 3> dims_scale1 = {1, 1, 1};
  int scale = 1;

  /// Cell counts at this geometry's scale: ceil(dims_scale1 / scale).
  [[nodiscard]] std::array<int, 3> dims() const { return dims_at(scale); }

  [[nodiscard]] std::array<int, 3> dims_at(int s) const {
    return {(dims_scale1[0] + s - 1) / s, (dims_scale1[1] + s - 1) / s,
            (dims_scale1[2] + s - 1) / s};
  }

  [[nodiscard]] double cell_size() const { return voxel_size * scale; }

  [[nodiscard]] std::size_t num_cells() const {
    const auto d = dims();
    return static_cast<std::size_t>(d[0]) * d[1] * d[2];
  }

  /// Same lattice, different scale.
  [[nodiscard]] GridGeometry at_scale(int s) const {
    if (!is_valid_scale(s)) {
      throw Error(Errc::kInvalidScale, "scale " + std::to_string(s));
    }
    GridGeometry g = *this;
    g.scale = s;
    return g;
  }

  [[nodiscard]] bool contains(const VoxelIndex& v) const {
    const auto d = dims_at(v.scale);
    return v.x >= 0 && v.y >= 0 && v.z >= 0 && v.x < d[0] && v.y < d[1] &&
           v.z < d[2];
  }

  /// Extent of the scale-1 lattice in world units (upper corner).
  [[nodiscard]] Eigen::Vector3d upper_corner() const {
    return origin + voxel_size * Eigen::Vector3d(dims_scale1[0],
                                                 dims_scale1[1],
                                                 dims_scale1[2]);
  }

  friend bool operator==(const GridGeometry& a, const GridGeometry& b) {
    return a.origin == b.origin && a.voxel_size == b.voxel_size &&
           a.dims_scale1 == b.dims_scale1 && a.scale == b.scale;
  }

  /// [-51.2, 51.2]^2 x [-5, 3] m at 0.2 m, 512 x 512 x 40.
  static GridGeometry nuscenes_occupancy() {
    return {Eigen::Vector3d(-51.2, -51.2, -5.0), 0.2, {512, 512, 40}, 1};
  }

  /// [0, 51.2] x [-25.6, 25.6] x [-2, 4.4] m at 0.2 m, 256 x 256 x 32.
  static GridGeometry semantic_kitti() {
    return {Eigen::Vector3d(0.0, -25.6, -2.0), 0.2, {256, 256, 32}, 1};
  }
};

/// Re-expresses an index at another scale. Coarse -> fine multiplies by the
/// ratio (the index of the anchor cell); fine -> coarse integer-divides and
/// so loses the sub-cell phase.
inline VoxelIndex align_scale(const VoxelIndex& idx, int target_scale) {
  if (idx.scale <= 0 || target_scale <= 0) {
    throw Error(Errc::kInvalidScale, "non-positive scale");
  }
  if (idx.scale >= target_scale) {
    if (idx.scale % target_scale != 0) {
      throw Error(Errc::kInvalidScale, std::to_string(idx.scale) + " -> " +
                                           std::to_string(target_scale));
    }
    const int r = idx.scale / target_scale;
    return {idx.x * r, idx.y * r, idx.z * r, target_scale};
  }
  if (target_scale % idx.scale != 0) {
    throw Error(Errc::kInvalidScale, std::to_string(idx.scale) + " -> " +
                                         std::to_string(target_scale));
  }
  const int r = target_scale / idx.scale;
  auto floor_div = [r](std::int32_t a) {
    return a >= 0 ? a / r : -((-a + r - 1) / r);
  };
  return {floor_div(idx.x), floor_div(idx.y), floor_div(idx.z), target_scale};
}

/// The factor^3 children of idx at scale idx.scale / factor, in
/// lexicographic order (z fastest).
inline std::vector<VoxelIndex> subdivide(const VoxelIndex& idx, int factor) {
  if (factor != 2 && factor != 4) {
    throw Error(Errc::kInvalidFactor, std::to_string(factor));
  }
  if (idx.scale % factor != 0) {
    throw Error(Errc::kInvalidScale, "scale " + std::to_string(idx.scale) +
                                         " not divisible by " +
                                         std::to_string(factor));
  }
  const int child_scale = idx.scale / factor;
  std::vector<VoxelIndex> out;
  out.reserve(static_cast<std::size_t>(factor * factor * factor));
  for (int dx = 0; dx < factor; ++dx) {
    for (int dy = 0; dy < factor; ++dy) {
      for (int dz = 0; dz < factor; ++dz) {
        out.push_back({idx.x * factor + dx, idx.y * factor + dy,
                       idx.z * factor + dz, child_scale});
      }
    }
  }
  return out;
}

inline Eigen::Vector3d voxel_center(const VoxelIndex& idx,
                                    const GridGeometry& geom) {
  if (!geom.contains(idx)) {
    throw Error(Errc::kOutOfBounds, to_string(idx));
  }
  const double size = geom.voxel_size * idx.scale;
  return geom.origin +
         size * Eigen::Vector3d(idx.x + 0.5, idx.y + 0.5, idx.z + 0.5);
}

/// Floor rule; nullopt when the point falls outside the lattice.
inline std::optional<VoxelIndex> world_to_voxel(const Eigen::Vector3d& p,
                                                const GridGeometry& geom,
                                                int scale) {
  const double size = geom.voxel_size * scale;
  const Eigen::Vector3d rel = (p - geom.origin) / size;
  if (!rel.allFinite()) return std::nullopt;
  VoxelIndex v{static_cast<std::int32_t>(std::floor(rel.x())),
               static_cast<std::int32_t>(std::floor(rel.y())),
               static_cast<std::int32_t>(std::floor(rel.z())), scale};
  // Guard the int conversion against huge values before the bounds check.
  const auto d = geom.dims_at(scale);
  if (rel.x() < 0 || rel.y() < 0 || rel.z() < 0 || rel.x() >= d[0] ||
      rel.y() >= d[1] || rel.z() >= d[2]) {
    return std::nullopt;
  }
  if (!geom.contains(v)) return std::nullopt;
  return v;
}

inline std::optional<VoxelIndex> world_to_voxel(const Eigen::Vector3d& p,
                                                const GridGeometry& geom) {
  return world_to_voxel(p, geom, geom.scale);
}

// 21 bits per axis. Every preset fits (largest axis is 512).
inline constexpr int kKeyBits = 21;
inline constexpr std::uint64_t kKeyMask = (std::uint64_t{1} << kKeyBits) - 1;

constexpr std::uint64_t pack_key(std::int32_t x, std::int32_t y,
                                 std::int32_t z) {
  return (static_cast<std::uint64_t>(x) & kKeyMask) << (2 * kKeyBits) |
         (static_cast<std::uint64_t>(y) & kKeyMask) << kKeyBits |
         (static_cast<std::uint64_t>(z) & kKeyMask);
}

constexpr std::uint64_t pack_key(const VoxelIndex& v) {
  return pack_key(v.x, v.y, v.z);
}

/// Coordinate-indexed feature rows at a single scale. Rows keep insertion
/// order until sort_lexicographic() is called; every pipeline stage emits
/// sorted grids.
class SparseVoxelGrid {
 public:
  SparseVoxelGrid() = default;
  SparseVoxelGrid(GridGeometry geometry, std::size_t channels)
      : geometry_(std::move(geometry)), channels_(channels) {}

  [[nodiscard]] const GridGeometry& geometry() const { return geometry_; }
  [[nodiscard]] int scale() const { return geometry_.scale; }
  [[nodiscard]] std::size_t channels() const { return channels_; }
  [[nodiscard]] std::size_t size() const { return coords_.size(); }
  [[nodiscard]] bool empty() const { return coords_.empty(); }

  [[nodiscard]] const std::vector<VoxelIndex>& coords() const {
    return coords_;
  }
  [[nodiscard]] const VoxelIndex& coord(std::size_t row) const {
    return coords_[row];
  }

  [[nodiscard]] std::span<const double> row(std::size_t r) const {
    return {features_.data() + r * channels_, channels_};
  }
  [[nodiscard]] std::span<double> row(std::size_t r) {
    return {features_.data() + r * channels_, channels_};
  }

  [[nodiscard]] const std::vector<double>& raw_features() const {
    return features_;
  }

  [[nodiscard]] std::optional<std::size_t> lookup(const VoxelIndex& v) const {
    if (v.scale != geometry_.scale) return std::nullopt;
    const auto it = index_.find(pack_key(v));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  [[nodiscard]] bool contains(const VoxelIndex& v) const {
    return lookup(v).has_value();
  }

  void reserve(std::size_t n) {
    coords_.reserve(n);
    features_.reserve(n * channels_);
    index_.reserve(n);
  }

  /// Appends a row. Duplicates are rejected; callers merge explicitly.
  std::size_t insert(const VoxelIndex& v, std::span<const double> feature) {
    if (feature.size() != channels_) {
      throw Error(Errc::kShapeError,
                  "feature width " + std::to_string(feature.size()) +
                      " != " + std::to_string(channels_));
    }
    const std::size_t r = insert_zero(v);
    std::copy(feature.begin(), feature.end(), row(r).begin());
    return r;
  }

  std::size_t insert_zero(const VoxelIndex& v) {
    if (v.scale != geometry_.scale) {
      throw Error(Errc::kInvalidScale, to_string(v) + " in scale-" +
                                           std::to_string(geometry_.scale) +
                                           " grid");
    }
    if (!geometry_.contains(v)) {
      throw Error(Errc::kOutOfBounds, to_string(v));
    }
    const auto r = coords_.size();
    const auto [it, inserted] = index_.emplace(pack_key(v), r);
    if (!inserted) {
      throw Error(Errc::kDuplicateVoxel, to_string(v));
    }
    coords_.push_back(v);
    features_.resize(features_.size() + channels_, 0.0);
    return r;
  }

  /// Returns the row for v, inserting a zero row first if absent.
  std::size_t find_or_insert(const VoxelIndex& v) {
    if (auto r = lookup(v)) return *r;
    return insert_zero(v);
  }

  void sort_lexicographic() {
    std::vector<std::size_t> order(coords_.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [this](std::size_t a, std::size_t b) {
      return coords_[a] < coords_[b];
    });
    std::vector<VoxelIndex> coords(coords_.size());
    std::vector<double> features(features_.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
      coords[i] = coords_[order[i]];
      std::copy_n(features_.begin() + order[i] * channels_, channels_,
                  features.begin() + i * channels_);
      index_[pack_key(coords[i])] = i;
    }
    coords_ = std::move(coords);
    features_ = std::move(features);
  }

  [[nodiscard]] bool is_sorted() const {
    return std::is_sorted(coords_.begin(), coords_.end());
  }

  /// Order-insensitive equality of geometry, coordinate set and features.
  friend bool operator==(const SparseVoxelGrid& a, const SparseVoxelGrid& b) {
    if (!(a.geometry_ == b.geometry_) || a.channels_ != b.channels_ ||
        a.size() != b.size()) {
      return false;
    }
    for (std::size_t r = 0; r < a.size(); ++r) {
      const auto rb = b.lookup(a.coords_[r]);
      if (!rb) return false;
      const auto fa = a.row(r);
      const auto fb = b.row(*rb);
      if (!std::equal(fa.begin(), fa.end(), fb.begin())) return false;
    }
    return true;
  }

 private:
  GridGeometry geometry_;
  std::size_t channels_ = 0;
  std::vector<VoxelIndex> coords_;
  std::vector<double> features_;
  std::unordered_map<std::uint64_t, std::size_t> index_;
};

/// Row-major dense volume, x slowest-varying and z fastest (the SemanticKITTI
/// devkit order).
template <typename T>
class DenseVolume {
 public:
  DenseVolume() = default;
  DenseVolume(std::array<int, 3> dims, T fill = T{})
      : dims_(dims),
        data_(static_cast<std::size_t>(dims[0]) * dims[1] * dims[2], fill) {}

  [[nodiscard]] const std::array<int, 3>& dims() const { return dims_; }
  [[nodiscard]] std::size_t size() const { return data_.size(); }

  [[nodiscard]] std::size_t linear(int x, int y, int z) const {
    return (static_cast<std::size_t>(x) * dims_[1] + y) * dims_[2] + z;
  }
  [[nodiscard]] bool in_bounds(int x, int y, int z) const {
    return x >= 0 && y >= 0 && z >= 0 && x < dims_[0] && y < dims_[1] &&
           z < dims_[2];
  }

  T& at(int x, int y, int z) { return data_[linear(x, y, z)]; }
  const T& at(int x, int y, int z) const { return data_[linear(x, y, z)]; }
  T& at(const VoxelIndex& v) { return at(v.x, v.y, v.z); }
  const T& at(const VoxelIndex& v) const { return at(v.x, v.y, v.z); }

  [[nodiscard]] std::vector<T>& data() { return data_; }
  [[nodiscard]] const std::vector<T>& data() const { return data_; }

  friend bool operator==(const DenseVolume&, const DenseVolume&) = default;

 private:
  std::array<int, 3> dims_ = {0, 0, 0};
  std::vector<T> data_;
};

}  // namespace mrvox

#endif  // MRVOX_VOXEL_CORE_HPP
