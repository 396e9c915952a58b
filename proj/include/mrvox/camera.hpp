// Copyright 2026 The mrvox Authors
// SPDX-License-Identifier: Apache-2.0
//
// Pinhole camera rig: projection, per-point camera visibility and bilinear
// sampling of per-camera 2D feature maps.
//
// Camera frame: x right, y down, z forward. Pixel (0, 0) is the center of the
// top-left pixel, u runs along columns and v along rows.

#ifndef MRVOX_CAMERA_HPP
#define MRVOX_CAMERA_HPP

#include <Eigen/Core>
#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mrvox/error.hpp"

namespace mrvox {

inline constexpr double kNearPlane = 0.1;  // meters

struct PixelHit {
  double u = 0.0;
  double v = 0.0;
  double depth = 0.0;
};

struct CameraModel {
  Eigen::Matrix3d intrinsics = Eigen::Matrix3d::Identity();
  Eigen::Matrix4d world_to_camera = Eigen::Matrix4d::Identity();
  int width = 1;
  int height = 1;

  [[nodiscard]] double fx() const { return intrinsics(0, 0); }
  [[nodiscard]] double fy() const { return intrinsics(1, 1); }
  [[nodiscard]] double cx() const { return intrinsics(0, 2); }
  [[nodiscard]] double cy() const { return intrinsics(1, 2); }

  [[nodiscard]] Eigen::Matrix3d rotation() const {
    return world_to_camera.topLeftCorner<3, 3>();
  }
  [[nodiscard]] Eigen::Vector3d translation() const {
    return world_to_camera.topRightCorner<3, 1>();
  }
  /// Camera center in world coordinates.
  [[nodiscard]] Eigen::Vector3d center() const {
    return -rotation().transpose() * translation();
  }

  void validate() const {
    if (!(fx() > 0.0) || !(fy() > 0.0)) {
      throw Error(Errc::kInvalidCamera, "focal lengths must be positive");
    }
    if (intrinsics(0, 1) != 0.0) {
      throw Error(Errc::kInvalidCamera, "non-zero skew");
    }
    if (width <= 0 || height <= 0) {
      throw Error(Errc::kInvalidCamera, "empty image");
    }
    const Eigen::Matrix3d r = rotation();
    if (!(r * r.transpose()).isApprox(Eigen::Matrix3d::Identity(), 1e-6) ||
        std::abs(r.determinant() - 1.0) > 1e-6) {
      throw Error(Errc::kInvalidCamera, "rotation is not a proper rotation");
    }
  }

  static CameraModel pinhole(double fx, double fy, double cx, double cy,
                             int width, int height,
                             const Eigen::Matrix4d& world_to_camera =
                                 Eigen::Matrix4d::Identity()) {
    CameraModel cam;
    cam.intrinsics << fx, 0.0, cx, 0.0, fy, cy, 0.0, 0.0, 1.0;
    cam.world_to_camera = world_to_camera;
    cam.width = width;
    cam.height = height;
    cam.validate();
    return cam;
  }
};

/// Returns nullopt when the point is not in front of the near plane or falls
/// outside [0, W) x [0, H).
inline std::optional<PixelHit> project(const CameraModel& cam,
                                       const Eigen::Vector3d& p_world) {
  const Eigen::Vector3d p = cam.rotation() * p_world + cam.translation();
  if (!(p.z() > kNearPlane)) return std::nullopt;
  const double u = cam.fx() * p.x() / p.z() + cam.cx();
  const double v = cam.fy() * p.y() / p.z() + cam.cy();
  if (!(u >= 0.0 && u < cam.width && v >= 0.0 && v < cam.height)) {
    return std::nullopt;
  }
  return PixelHit{u, v, p.z()};
}

/// World point at the given depth along the ray through pixel (u, v).
inline Eigen::Vector3d back_project(const CameraModel& cam, double u, double v,
                                    double depth) {
  const Eigen::Vector3d p_cam((u - cam.cx()) / cam.fx() * depth,
                              (v - cam.cy()) / cam.fy() * depth, depth);
  return cam.rotation().transpose() * (p_cam - cam.translation());
}

/// Unit viewing direction of pixel (u, v) in world coordinates.
inline Eigen::Vector3d pixel_ray(const CameraModel& cam, double u, double v) {
  const Eigen::Vector3d d((u - cam.cx()) / cam.fx(), (v - cam.cy()) / cam.fy(),
                          1.0);
  return (cam.rotation().transpose() * d).normalized();
}

/// Pixel distance between the projection of p_world and the re-projection of
/// its back-projected world point; nullopt when p_world misses the image.
inline std::optional<double> roundtrip_check(const CameraModel& cam,
                                             const Eigen::Vector3d& p_world) {
  const auto hit = project(cam, p_world);
  if (!hit) return std::nullopt;
  const Eigen::Vector3d back = back_project(cam, hit->u, hit->v, hit->depth);
  const Eigen::Vector3d p = cam.rotation() * back + cam.translation();
  const double u = cam.fx() * p.x() / p.z() + cam.cx();
  const double v = cam.fy() * p.y() / p.z() + cam.cy();
  return std::hypot(u - hit->u, v - hit->v);
}

using CameraRig = std::vector<CameraModel>;

/// Ids (ascending) of the cameras in which p_world projects inside the image.
inline std::vector<std::size_t> visible_cameras(const CameraRig& rig,
                                                const Eigen::Vector3d& p_world) {
  std::vector<std::size_t> ids;
  for (std::size_t i = 0; i < rig.size(); ++i) {
    if (project(rig[i], p_world)) ids.push_back(i);
  }
  return ids;
}

/// H x W x C feature image, row-major with channels fastest.
struct ImageFeatures {
  int width = 0;
  int height = 0;
  std::size_t channels = 0;
  std::vector<double> data;

  ImageFeatures() = default;
  ImageFeatures(int w, int h, std::size_t c, double fill = 0.0)
      : width(w), height(h), channels(c),
        data(static_cast<std::size_t>(w) * h * c, fill) {}

  [[nodiscard]] std::span<const double> pixel(int col, int row) const {
    return {data.data() + (static_cast<std::size_t>(row) * width + col) *
                              channels,
            channels};
  }
  [[nodiscard]] std::span<double> pixel(int col, int row) {
    return {data.data() + (static_cast<std::size_t>(row) * width + col) *
                              channels,
            channels};
  }
};

/// One feature image per camera; all share the channel count.
struct FeatureMap2D {
  std::vector<ImageFeatures> images;

  [[nodiscard]] std::size_t channels() const {
    return images.empty() ? 0 : images.front().channels;
  }

  void validate() const {
    for (const auto& im : images) {
      if (im.channels != channels()) {
        throw Error(Errc::kShapeError, "cameras disagree on channel count");
      }
      if (im.data.size() !=
          static_cast<std::size_t>(im.width) * im.height * im.channels) {
        throw Error(Errc::kShapeError, "feature image size mismatch");
      }
    }
  }
};

/// Bilinear interpolation between the four neighboring pixel centers, written
/// as nested lerps so a constant neighborhood reproduces its value exactly.
/// Taps outside the image read as zero. Overwrites `out`.
inline void bilinear_sample_into(const ImageFeatures& im, double u, double v,
                                 std::span<double> out) {
  std::fill(out.begin(), out.end(), 0.0);
  if (!std::isfinite(u) || !std::isfinite(v)) return;
  const double fu = std::floor(u);
  const double fv = std::floor(v);
  if (fu < -1.0 || fv < -1.0 || fu >= im.width || fv >= im.height) return;
  const int x0 = static_cast<int>(fu);
  const int y0 = static_cast<int>(fv);
  const double ax = u - fu;
  const double ay = v - fv;
  auto tap = [&im](int x, int y, std::size_t c) {
    if (x < 0 || y < 0 || x >= im.width || y >= im.height) return 0.0;
    return im.pixel(x, y)[c];
  };
  for (std::size_t c = 0; c < out.size(); ++c) {
    const double t00 = tap(x0, y0, c);
    const double t10 = tap(x0 + 1, y0, c);
    const double t01 = tap(x0, y0 + 1, c);
    const double t11 = tap(x0 + 1, y0 + 1, c);
    const double top = t00 + ax * (t10 - t00);
    const double bottom = t01 + ax * (t11 - t01);
    out[c] = top + ay * (bottom - top);
  }
}

inline std::vector<double> bilinear_sample(const FeatureMap2D& map,
                                           std::size_t cam_id, double u,
                                           double v) {
  if (cam_id >= map.images.size()) {
    throw Error(Errc::kShapeError, "no feature map for camera " +
                                       std::to_string(cam_id));
  }
  std::vector<double> out(map.channels(), 0.0);
  bilinear_sample_into(map.images[cam_id], u, v, out);
  return out;
}

/// Camera looking along the world direction (cos yaw, sin yaw, 0) from
/// `position`, with world z up. Horizontal field of view in radians.
inline CameraModel ring_camera(const Eigen::Vector3d& position, double yaw,
                               double hfov, int width, int height) {
  const Eigen::Vector3d forward(std::cos(yaw), std::sin(yaw), 0.0);
  const Eigen::Vector3d right(std::sin(yaw), -std::cos(yaw), 0.0);
  const Eigen::Vector3d down(0.0, 0.0, -1.0);
  Eigen::Matrix3d r;
  r.row(0) = right.transpose();
  r.row(1) = down.transpose();
  r.row(2) = forward.transpose();
  Eigen::Matrix4d t = Eigen::Matrix4d::Identity();
  t.topLeftCorner<3, 3>() = r;
  t.topRightCorner<3, 1>() = -r * position;
  const double f = 0.5 * width / std::tan(0.5 * hfov);
  return CameraModel::pinhole(f, f, 0.5 * (width - 1), 0.5 * (height - 1),
                              width, height, t);
}

}  // namespace mrvox

#endif  // MRVOX_CAMERA_HPP
