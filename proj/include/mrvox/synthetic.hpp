// Copyright 2026 The mrvox Authors
// SPDX-License-Identifier: Apache-2.0

// Parametric test scenes. Ground truth, the simulated LiDAR sweep and the
// rendered camera features are all derived from one list of boxes, so they
// agree by construction.

#ifndef MRVOX_SYNTHETIC_HPP
#define MRVOX_SYNTHETIC_HPP

#include <Eigen/Core>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "mrvox/camera.hpp"
#include "mrvox/error.hpp"
#include "mrvox/lidar.hpp"
#include "mrvox/occlusion.hpp"
#include "mrvox/random.hpp"
#include "mrvox/voxel_core.hpp"

namespace mrvox {

inline constexpr std::uint16_t kGroundClass = 1;
inline constexpr std::uint16_t kWallClass = 2;
inline constexpr std::uint16_t kCarClass = 3;
inline constexpr std::uint16_t kPedestrianClass = 4;

/// Foreground ("thing") classes of the synthetic label set.
inline bool is_thing(std::uint16_t cls) {
  return cls == kCarClass || cls == kPedestrianClass;
}

/// Axis-aligned block of scale-1 cells, [lo, hi) on each axis.
struct SceneBox {
  std::array<int, 3> lo = {0, 0, 0};
  std::array<int, 3> hi = {0, 0, 0};
  std::uint16_t cls = 0;
};

struct LidarSpec {
  Eigen::Vector3d origin = Eigen::Vector3d::Zero();
  int azimuth_steps = 720;
  int elevation_steps = 16;
  double elevation_lo = -30.0 * std::numbers::pi / 180.0;
  double elevation_hi = 5.0 * std::numbers::pi / 180.0;
};

struct SceneSpec {
  GridGeometry geometry;
  std::vector<SceneBox> boxes;  // later boxes overwrite earlier ones
  LidarSpec lidar;
  CameraRig rig;
  std::size_t image_channels = 8;
};

struct SyntheticScene {
  SceneSpec spec;
  SemanticVolume gt;
  PointCloud cloud;
  FeatureMap2D images;

  [[nodiscard]] const GridGeometry& geometry() const { return spec.geometry; }
  [[nodiscard]] const CameraRig& rig() const { return spec.rig; }
};

inline SemanticVolume rasterize(const GridGeometry& geom,
                                const std::vector<SceneBox>& boxes) {
  SemanticVolume gt(geom.dims(), kEmptyClass);
  const auto d = geom.dims();
  for (const auto& b : boxes) {
    for (int x = std::max(b.lo[0], 0); x < std::min(b.hi[0], d[0]); ++x) {
      for (int y = std::max(b.lo[1], 0); y < std::min(b.hi[1], d[1]); ++y) {
        for (int z = std::max(b.lo[2], 0); z < std::min(b.hi[2], d[2]); ++z) {
          gt.at(x, y, z) = b.cls;
        }
      }
    }
  }
  return gt;
}

namespace detail {

/// First labeled cell the ray passes through and the ray parameter (meters)
/// at the middle of its passage through that cell.
struct FirstHit {
  VoxelIndex cell;
  double t = 0.0;
};

inline std::optional<FirstHit> first_hit(const Eigen::Vector3d& origin,
                                         const Eigen::Vector3d& dir,
                                         const SemanticVolume& gt,
                                         const GridGeometry& geom, double reach) {
  const auto ray = traverse(origin, origin + reach * dir, geom);
  for (const auto& v : ray) {
    if (!is_labeled(gt.at(v))) continue;
    const double s = geom.cell_size();
    const Eigen::Vector3d lo =
        geom.origin + s * Eigen::Vector3d(v.x, v.y, v.z);
    double t0 = 0.0;
    double t1 = reach;
    for (int k = 0; k < 3; ++k) {
      if (dir[k] == 0.0) continue;
      double a = (lo[k] - origin[k]) / dir[k];
      double b = (lo[k] + s - origin[k]) / dir[k];
      if (a > b) std::swap(a, b);
      t0 = std::max(t0, a);
      t1 = std::min(t1, b);
    }
    // A beam through a lattice edge or corner can touch a cell without
    // passing through it; it returns from the next cell instead.
    if (t1 - t0 <= 1e-9 * s) continue;
    return FirstHit{v, 0.5 * (t0 + t1)};
  }
  return std::nullopt;
}

inline double reach_of(const Eigen::Vector3d& from, const GridGeometry& geom) {
  const Eigen::Vector3d mid = 0.5 * (geom.origin + geom.upper_corner());
  return (from - mid).norm() + (geom.upper_corner() - geom.origin).norm();
}

}  // namespace detail

/// Return intensity per class, fixed so scans are reproducible.
inline double class_intensity(std::uint16_t cls) {
  return std::clamp(0.15 * static_cast<double>(cls), 0.0, 1.0);
}

/// Spinning-sensor sweep: every beam returns the midpoint of its first
/// labeled cell. Beams that hit nothing return no point.
inline PointCloud simulate_lidar(const SemanticVolume& gt, const GridGeometry& geom,
                                 const LidarSpec& spec) {
  PointCloud pc;
  pc.sensor_origin = spec.origin;
  const double reach = detail::reach_of(spec.origin, geom);
  for (int e = 0; e < spec.elevation_steps; ++e) {
    const double el =
        spec.elevation_steps == 1
            ? spec.elevation_lo
            : spec.elevation_lo + (spec.elevation_hi - spec.elevation_lo) * e /
                                      (spec.elevation_steps - 1);
    for (int a = 0; a < spec.azimuth_steps; ++a) {
      const double az = 2.0 * std::numbers::pi * a / spec.azimuth_steps;
      const Eigen::Vector3d dir(std::cos(el) * std::cos(az),
                                std::cos(el) * std::sin(az), std::sin(el));
      const auto hit = detail::first_hit(spec.origin, dir, gt, geom, reach);
      if (!hit) continue;
      pc.points.push_back({spec.origin + hit->t * dir,
                           class_intensity(gt.at(hit->cell))});
    }
  }
  return pc;
}

/// Fixed per-class feature vector in [-1, 1]^channels.
inline std::vector<double> class_color(std::uint16_t cls, std::size_t channels) {
  Rng rng(split_seed(cls, "palette"));
  std::vector<double> c(channels);
  for (double& x : c) x = rng.uniform(-1.0, 1.0);
  return c;
}

/// Per-pixel class colors of the first labeled cell along each pixel ray;
/// pixels that see nothing stay zero.
inline FeatureMap2D render_features(const SemanticVolume& gt, const GridGeometry& geom,
                                    const CameraRig& rig, std::size_t channels) {
  FeatureMap2D maps;
  for (const auto& cam : rig) {
    ImageFeatures im(cam.width, cam.height, channels);
    const Eigen::Vector3d c = cam.center();
    const double reach = detail::reach_of(c, geom);
    for (int v = 0; v < cam.height; ++v) {
      for (int u = 0; u < cam.width; ++u) {
        const Eigen::Vector3d dir = pixel_ray(cam, u, v);
        const auto hit = detail::first_hit(c + kNearPlane * dir, dir, gt, geom, reach);
        if (!hit) continue;
        const auto color = class_color(gt.at(hit->cell), channels);
        std::copy(color.begin(), color.end(), im.pixel(u, v).begin());
      }
    }
    maps.images.push_back(std::move(im));
  }
  return maps;
}

inline SyntheticScene build_scene(SceneSpec spec) {
  SyntheticScene scene;
  scene.gt = rasterize(spec.geometry, spec.boxes);
  scene.cloud = simulate_lidar(scene.gt, spec.geometry, spec.lidar);
  scene.images = render_features(scene.gt, spec.geometry, spec.rig, spec.image_channels);
  scene.spec = std::move(spec);
  return scene;
}

/// Six cameras around one point, 70 degree horizontal field of view each.
inline CameraRig surround_rig(const Eigen::Vector3d& position, int width = 64,
                              int height = 40) {
  CameraRig rig;
  for (int k = 0; k < 6; ++k) {
    rig.push_back(ring_camera(position, k * std::numbers::pi / 3.0,
                              70.0 * std::numbers::pi / 180.0, width, height));
  }
  return rig;
}

namespace detail {

/// Sensor head 1.8 m above the bottom of the lattice, centered in x and y.
inline Eigen::Vector3d sensor_position(const GridGeometry& geom) {
  const Eigen::Vector3d mid = 0.5 * (geom.origin + geom.upper_corner());
  return {mid.x(), mid.y(), geom.origin.z() + 1.8};
}

inline SceneSpec base_spec(const GridGeometry& geom, std::size_t image_channels) {
  SceneSpec spec;
  spec.geometry = geom.at_scale(1);
  spec.lidar.origin = sensor_position(spec.geometry);
  spec.rig = surround_rig(spec.lidar.origin);
  spec.image_channels = image_channels;
  return spec;
}

inline bool overlaps(const SceneBox& a, const SceneBox& b, int gap) {
  for (int k = 0; k < 2; ++k) {
    if (a.hi[k] + gap <= b.lo[k] || b.hi[k] + gap <= a.lo[k]) return false;
  }
  return true;
}

}  // namespace detail

/// Ground slab one cell thick, a two-cell wall along each y border, and a
/// handful of cars and pedestrians placed from `seed`.
inline SceneSpec street_spec(const GridGeometry& geom, std::uint64_t seed,
                             std::size_t image_channels = 8) {
  SceneSpec spec = detail::base_spec(geom, image_channels);
  const auto d = spec.geometry.dims();
  const double s = spec.geometry.voxel_size;
  const int wall_top = d[2];
  spec.boxes.push_back({{0, 0, 0}, {d[0], d[1], 1}, kGroundClass});
  spec.boxes.push_back({{0, 0, 1}, {d[0], 2, wall_top}, kWallClass});
  spec.boxes.push_back({{0, d[1] - 2, 1}, {d[0], d[1], wall_top}, kWallClass});

  Rng rng(split_seed(seed, "street"));
  const auto cells = [s](double meters) {
    return std::max(1, static_cast<int>(std::lround(meters / s)));
  };
  const std::array<int, 3> car = {cells(4.0), cells(1.8), cells(1.4)};
  const std::array<int, 3> person = {cells(0.6), cells(0.6), cells(1.8)};
  const Eigen::Vector3d sensor = spec.lidar.origin;
  const int sx = static_cast<int>((sensor.x() - spec.geometry.origin.x()) / s);
  const int sy = static_cast<int>((sensor.y() - spec.geometry.origin.y()) / s);
  const int clear = cells(2.0);

  std::vector<SceneBox> things;
  const auto place = [&](std::array<int, 3> size, std::uint16_t cls) {
    for (int attempt = 0; attempt < 50; ++attempt) {
      const bool turned = cls == kCarClass && rng.uniform() < 0.5;
      const int ex = turned ? size[1] : size[0];
      const int ey = turned ? size[0] : size[1];
      if (ex + 6 >= d[0] || ey + 6 >= d[1]) return;
      const int x0 = static_cast<int>(rng.uniform_int(3, d[0] - ex - 3));
      const int y0 = static_cast<int>(rng.uniform_int(3, d[1] - ey - 3));
      SceneBox b{{x0, y0, 1}, {x0 + ex, y0 + ey, std::min(d[2], 1 + size[2])}, cls};
      const SceneBox keep_out{{sx - clear, sy - clear, 0}, {sx + clear, sy + clear, 0}, 0};
      if (detail::overlaps(b, keep_out, 0)) continue;
      if (std::any_of(things.begin(), things.end(),
                      [&](const SceneBox& o) { return detail::overlaps(b, o, 2); })) {
        continue;
      }
      things.push_back(b);
      return;
    }
  };
  const int n_cars = static_cast<int>(rng.uniform_int(3, 6));
  const int n_people = static_cast<int>(rng.uniform_int(0, 3));
  for (int i = 0; i < n_cars; ++i) place(car, kCarClass);
  for (int i = 0; i < n_people; ++i) place(person, kPedestrianClass);
  spec.boxes.insert(spec.boxes.end(), things.begin(), things.end());
  return spec;
}

/// One two-cell-thick wall across the +x side of the sensor, nothing else.
inline SceneSpec wall_spec(const GridGeometry& geom, std::size_t image_channels = 8) {
  SceneSpec spec = detail::base_spec(geom, image_channels);
  const auto d = spec.geometry.dims();
  const int x = (3 * d[0]) / 4;
  spec.boxes.push_back({{x, 0, 0}, {x + 2, d[1], d[2]}, kWallClass});
  return spec;
}

inline SceneSpec empty_spec(const GridGeometry& geom, std::size_t image_channels = 8) {
  return detail::base_spec(geom, image_channels);
}

/// "street", "wall" or "empty".
inline SceneSpec named_scene_spec(const std::string& name, const GridGeometry& geom,
                                  std::uint64_t seed, std::size_t image_channels = 8) {
  if (name == "street") return street_spec(geom, seed, image_channels);
  if (name == "wall") return wall_spec(geom, image_channels);
  if (name == "empty") return empty_spec(geom, image_channels);
  throw Error(Errc::kConfigError, "unknown synthetic scene '" + name + "'");
}

}  // namespace mrvox

#endif  // MRVOX_SYNTHETIC_HPP
