// Copyright 2026 The mrvox Authors
// SPDX-License-Identifier: Apache-2.0

// On-disk formats: KITTI velodyne scans and calibration, SemanticKITTI voxel
// labels and bit-packed masks, mrvox volumes with a text sidecar, and camera
// rigs as JSON. Every reader validates sizes before decoding, so a truncated
// file is an error rather than a short result.

#ifndef MRVOX_IO_HPP
#define MRVOX_IO_HPP

#include <Eigen/Core>
#include <Eigen/SVD>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <nlohmann/json.hpp>

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "mrvox/camera.hpp"
#include "mrvox/error.hpp"
#include "mrvox/lidar.hpp"
#include "mrvox/occlusion.hpp"
#include "mrvox/voxel_core.hpp"

namespace mrvox::io {

namespace fs = std::filesystem;

inline std::vector<std::uint8_t> read_bytes(const fs::path& path) {
  if (!fs::is_regular_file(path)) {
    throw Error(Errc::kNotFound, path.string());
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::kNotFound, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_bytes(const fs::path& path, const std::vector<std::uint8_t>& bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::kNotFound, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(Errc::kNotFound, "short write to " + path.string());
}

inline std::string read_text(const fs::path& path) {
  const auto bytes = read_bytes(path);
  return {bytes.begin(), bytes.end()};
}

// Explicit little-endian codecs; the host byte order never leaks into files.
inline std::uint16_t load_u16(const std::uint8_t* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}
inline std::uint32_t load_u32(const std::uint8_t* p) {
  return std::uint32_t{p[0]} | (std::uint32_t{p[1]} << 8) |
         (std::uint32_t{p[2]} << 16) | (std::uint32_t{p[3]} << 24);
}
inline void store_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xff));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}
inline void store_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

// ---------------------------------------------------------------------------
// KITTI velodyne scans: float32 (x, y, z, intensity) records, no header.

inline PointCloud decode_velodyne(const std::vector<std::uint8_t>& bytes,
                                  const std::string& name = "scan") {
  if (bytes.size() % 16 != 0) {
    throw Error(Errc::kParseError, name + ": " + std::to_string(bytes.size()) +
                                       " bytes is not a whole number of "
                                       "16-byte points");
  }
  PointCloud pc;
  pc.points.reserve(bytes.size() / 16);
  for (std::size_t off = 0; off < bytes.size(); off += 16) {
    std::array<float, 4> f{};
    for (int k = 0; k < 4; ++k) {
      f[k] = std::bit_cast<float>(load_u32(bytes.data() + off + 4 * k));
    }
    for (float x : f) {
      if (!std::isfinite(x)) {
        throw Error(Errc::kParseError, name + ": non-finite value at point " +
                                           std::to_string(off / 16));
      }
    }
    pc.points.push_back({Eigen::Vector3d(f[0], f[1], f[2]), f[3]});
  }
  return pc;
}

inline PointCloud read_velodyne(const fs::path& path) {
  return decode_velodyne(read_bytes(path), path.string());
}

inline void write_velodyne(const fs::path& path, const PointCloud& pc) {
  std::vector<std::uint8_t> bytes;
  bytes.reserve(pc.points.size() * 16);
  for (const auto& p : pc.points) {
    for (double v : {p.position.x(), p.position.y(), p.position.z(), p.intensity}) {
      store_u32(bytes, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
    }
  }
  write_bytes(path, bytes);
}

// ---------------------------------------------------------------------------
// KITTI odometry calib.txt ("KEY: v0 v1 ... v11" per line).

struct KittiCalib {
  Eigen::Matrix<double, 3, 4> p2 = Eigen::Matrix<double, 3, 4>::Zero();
  Eigen::Matrix4d tr = Eigen::Matrix4d::Identity();  // velodyne -> camera 0
};

inline KittiCalib parse_kitti_calib(const std::string& text,
                                    const std::string& name = "calib") {
  std::map<std::string, std::vector<double>> rows;
  std::istringstream lines(text);
  std::string line;
  while (std::getline(lines, line)) {
    const auto colon = line.find(':');
    if (colon == std::string::npos) continue;
    std::istringstream values(line.substr(colon + 1));
    std::vector<double> v;
    double x = 0.0;
    while (values >> x) v.push_back(x);
    if (!values.eof()) {
      throw Error(Errc::kParseError, name + ": bad number in '" + line + "'");
    }
    rows[line.substr(0, colon)] = std::move(v);
  }
  const auto take = [&](const std::string& key) {
    const auto it = rows.find(key);
    if (it == rows.end() || it->second.size() != 12) {
      throw Error(Errc::kParseError, name + ": missing or short " + key);
    }
    return Eigen::Map<const Eigen::Matrix<double, 3, 4, Eigen::RowMajor>>(
        it->second.data());
  };
  KittiCalib calib;
  calib.p2 = take("P2");
  calib.tr.topRows<3>() = take("Tr");
  return calib;
}

inline KittiCalib read_kitti_calib(const fs::path& path) {
  return parse_kitti_calib(read_text(path), path.string());
}

/// Camera 2 as seen from the velodyne frame. P2 = K [I | t] in the rectified
/// frame, so world_to_camera = [I | K^-1 p4] * Tr. The stored rotation is
/// only orthonormal to float precision and is snapped to the nearest
/// rotation.
inline CameraModel camera_from_calib(const KittiCalib& calib, int width = 1241,
                                     int height = 376) {
  const Eigen::Matrix3d k = calib.p2.leftCols<3>();
  Eigen::Matrix4d shift = Eigen::Matrix4d::Identity();
  shift.topRightCorner<3, 1>() = k.inverse() * calib.p2.col(3);
  Eigen::Matrix4d t = shift * calib.tr;
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(t.topLeftCorner<3, 3>(),
                                        Eigen::ComputeFullU | Eigen::ComputeFullV);
  t.topLeftCorner<3, 3>() = svd.matrixU() * svd.matrixV().transpose();
  return CameraModel::pinhole(k(0, 0), k(1, 1), k(0, 2), k(1, 2), width, height, t);
}

// ---------------------------------------------------------------------------
// SemanticKITTI voxel files. Arrays are x slowest, z fastest, which is the
// DenseVolume order, so decoding is a straight copy.

inline std::size_t volume_size(const std::array<int, 3>& dims) {
  return static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
}

inline SemanticVolume decode_labels(const std::vector<std::uint8_t>& bytes,
                                    const std::array<int, 3>& dims,
                                    const std::string& name = "labels") {
  const std::size_t n = volume_size(dims);
  if (bytes.size() != 2 * n) {
    throw Error(Errc::kParseError, name + ": expected " + std::to_string(2 * n) +
                                       " bytes, found " +
                                       std::to_string(bytes.size()));
  }
  SemanticVolume vol(dims);
  for (std::size_t i = 0; i < n; ++i) vol.data()[i] = load_u16(bytes.data() + 2 * i);
  return vol;
}

inline SemanticVolume read_labels(const fs::path& path, const std::array<int, 3>& dims) {
  return decode_labels(read_bytes(path), dims, path.string());
}

inline void write_labels(const fs::path& path, const SemanticVolume& vol) {
  std::vector<std::uint8_t> bytes;
  bytes.reserve(2 * vol.size());
  for (const auto v : vol.data()) store_u16(bytes, v);
  write_bytes(path, bytes);
}

/// Masks packed eight voxels per byte, most significant bit first.
inline std::vector<std::uint8_t> unpack_bits(const std::vector<std::uint8_t>& bytes,
                                             std::size_t n,
                                             const std::string& name = "mask") {
  if (bytes.size() != (n + 7) / 8) {
    throw Error(Errc::kParseError, name + ": expected " +
                                       std::to_string((n + 7) / 8) +
                                       " bytes, found " +
                                       std::to_string(bytes.size()));
  }
  std::vector<std::uint8_t> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = (bytes[i / 8] >> (7 - i % 8)) & 1U;
  }
  return out;
}

inline std::vector<std::uint8_t> pack_bits(const std::vector<std::uint8_t>& mask) {
  std::vector<std::uint8_t> out((mask.size() + 7) / 8, 0);
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask[i] != 0) out[i / 8] |= static_cast<std::uint8_t>(0x80U >> (i % 8));
  }
  return out;
}

inline std::vector<std::uint8_t> read_mask(const fs::path& path,
                                           const std::array<int, 3>& dims) {
  return unpack_bits(read_bytes(path), volume_size(dims), path.string());
}

inline void write_mask(const fs::path& path, const std::vector<std::uint8_t>& mask) {
  write_bytes(path, pack_bits(mask));
}

/// Raw SemanticKITTI ids to the 20 training classes (0 = empty). Ids absent
/// from the table map to kIgnoreClass.
inline const std::map<std::uint16_t, std::uint16_t>& semantic_kitti_learning_map() {
  static const std::map<std::uint16_t, std::uint16_t> table = {
      {0, 0},    {1, 0},    {10, 1},   {11, 2},   {13, 5},   {15, 3},
      {16, 5},   {18, 4},   {20, 5},   {30, 6},   {31, 7},   {32, 8},
      {40, 9},   {44, 10},  {48, 11},  {49, 12},  {50, 13},  {51, 14},
      {52, 0},   {60, 9},   {70, 15},  {71, 16},  {72, 17},  {80, 18},
      {81, 19},  {99, 0},   {252, 1},  {253, 7},  {254, 6},  {255, 8},
      {256, 5},  {257, 5},  {258, 4},  {259, 5}};
  return table;
}

inline void remap_labels(SemanticVolume& vol,
                         const std::map<std::uint16_t, std::uint16_t>& table =
                             semantic_kitti_learning_map()) {
  for (auto& v : vol.data()) {
    const auto it = table.find(v);
    v = it == table.end() ? kIgnoreClass : it->second;
  }
}

/// Voxels flagged invalid become kIgnoreClass.
inline void apply_invalid(SemanticVolume& vol, const std::vector<std::uint8_t>& invalid) {
  if (invalid.size() != vol.size()) {
    throw Error(Errc::kDimMismatch, "invalid mask size differs from volume");
  }
  for (std::size_t i = 0; i < invalid.size(); ++i) {
    if (invalid[i] != 0) vol.data()[i] = kIgnoreClass;
  }
}

// ---------------------------------------------------------------------------
// mrvox volumes: a flat little-endian array plus "<file>.hdr", a key = value
// text header.

struct VolumeHeader {
  std::array<int, 3> dims = {0, 0, 0};
  int scale = 1;
  Eigen::Vector3d origin = Eigen::Vector3d::Zero();
  double voxel_size = 0.0;  // at scale 1
  std::uint64_t seed = 0;
  std::string dtype = "uint8";

  friend bool operator==(const VolumeHeader&, const VolumeHeader&) = default;
};

inline std::size_t dtype_bytes(const std::string& dtype) {
  if (dtype == "uint8") return 1;
  if (dtype == "uint16") return 2;
  throw Error(Errc::kParseError, "unknown dtype " + dtype);
}

inline fs::path header_path(const fs::path& data) {
  return fs::path(data.string() + ".hdr");
}

inline std::string format_double(double v) {
  std::ostringstream s;
  s.precision(17);
  s << v;
  return s.str();
}

inline void write_header(const fs::path& data, const VolumeHeader& h) {
  boost::property_tree::ptree t;
  t.put("format", "mrvox-volume-1");
  t.put("dims", std::to_string(h.dims[0]) + " " + std::to_string(h.dims[1]) +
                    " " + std::to_string(h.dims[2]));
  t.put("scale", h.scale);
  t.put("origin", format_double(h.origin.x()) + " " + format_double(h.origin.y()) +
                      " " + format_double(h.origin.z()));
  t.put("voxel_size", format_double(h.voxel_size));
  t.put("seed", h.seed);
  t.put("dtype", h.dtype);
  t.put("order", "x-slowest");
  std::ostringstream s;
  boost::property_tree::write_ini(s, t);
  const std::string text = s.str();
  write_bytes(header_path(data), {text.begin(), text.end()});
}

inline VolumeHeader parse_header(const std::string& text, const std::string& name) {
  boost::property_tree::ptree t;
  try {
    std::istringstream in(text);
    boost::property_tree::read_ini(in, t);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw Error(Errc::kParseError, name + ": " + e.what());
  }
  const auto field = [&](const std::string& key) {
    const auto v = t.get_optional<std::string>(key);
    if (!v) throw Error(Errc::kParseError, name + ": missing " + key);
    return std::istringstream(*v);
  };
  if (t.get<std::string>("format", "") != "mrvox-volume-1") {
    throw Error(Errc::kParseError, name + ": not an mrvox volume header");
  }
  VolumeHeader h;
  auto dims = field("dims");
  auto scale = field("scale");
  auto origin = field("origin");
  auto voxel = field("voxel_size");
  auto seed = field("seed");
  auto dtype = field("dtype");
  const bool ok = (dims >> h.dims[0] >> h.dims[1] >> h.dims[2]) && (scale >> h.scale) &&
                  (origin >> h.origin.x() >> h.origin.y() >> h.origin.z()) &&
                  (voxel >> h.voxel_size) && (seed >> h.seed) && (dtype >> h.dtype);
  if (!ok || h.dims[0] <= 0 || h.dims[1] <= 0 || h.dims[2] <= 0) {
    throw Error(Errc::kParseError, name + ": malformed header");
  }
  dtype_bytes(h.dtype);
  return h;
}

inline VolumeHeader read_header(const fs::path& data) {
  const fs::path p = header_path(data);
  return parse_header(read_text(p), p.string());
}

inline VolumeHeader header_for(const GridGeometry& geom, std::uint64_t seed,
                               const std::string& dtype) {
  return {geom.dims(), geom.scale, geom.origin, geom.voxel_size, seed, dtype};
}

inline void write_occlusion(const fs::path& path, const OcclusionGrid& labels,
                            const GridGeometry& geom, std::uint64_t seed) {
  if (labels.dims() != geom.dims()) {
    throw Error(Errc::kDimMismatch, "occlusion volume does not match geometry");
  }
  std::vector<std::uint8_t> bytes(labels.size());
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    bytes[i] = static_cast<std::uint8_t>(labels.data()[i]);
  }
  write_bytes(path, bytes);
  write_header(path, header_for(geom, seed, "uint8"));
}

inline OcclusionGrid read_occlusion(const fs::path& path, VolumeHeader* header = nullptr) {
  const VolumeHeader h = read_header(path);
  if (h.dtype != "uint8") {
    throw Error(Errc::kParseError, path.string() + ": occlusion volumes are uint8");
  }
  const auto bytes = read_bytes(path);
  if (bytes.size() != volume_size(h.dims)) {
    throw Error(Errc::kParseError, path.string() + ": size disagrees with header");
  }
  OcclusionGrid out(h.dims);
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    if (bytes[i] > 2) {
      throw Error(Errc::kParseError, path.string() + ": label byte " +
                                         std::to_string(bytes[i]));
    }
    out.data()[i] = static_cast<OcclusionLabel>(bytes[i]);
  }
  if (header != nullptr) *header = h;
  return out;
}

/// Class volume with a sidecar header.
inline void write_class_volume(const fs::path& path, const SemanticVolume& vol,
                               const GridGeometry& geom, std::uint64_t seed) {
  if (vol.dims() != geom.dims()) {
    throw Error(Errc::kDimMismatch, "class volume does not match geometry");
  }
  write_labels(path, vol);
  write_header(path, header_for(geom, seed, "uint16"));
}

/// Reads a uint16 class volume. Dims come from the sidecar header when one
/// exists, otherwise from `fallback_dims`.
inline SemanticVolume read_class_volume(const fs::path& path,
                                        const std::array<int, 3>& fallback_dims) {
  std::array<int, 3> dims = fallback_dims;
  if (fs::exists(header_path(path))) {
    const VolumeHeader h = read_header(path);
    if (h.dtype != "uint16") {
      throw Error(Errc::kParseError, path.string() + ": class volumes are uint16");
    }
    dims = h.dims;
  }
  return read_labels(path, dims);
}

/// Flat uint16 class array of any length. When a sidecar header exists its
/// dims must account for every byte, and it is returned through `header`.
inline std::vector<std::uint16_t> read_class_values(const fs::path& path,
                                                    std::optional<VolumeHeader>* header = nullptr) {
  const auto bytes = read_bytes(path);
  if (bytes.size() % 2 != 0) {
    throw Error(Errc::kParseError, path.string() + ": odd byte count for uint16 data");
  }
  std::optional<VolumeHeader> h;
  if (fs::exists(header_path(path))) {
    h = read_header(path);
    if (h->dtype != "uint16" || 2 * volume_size(h->dims) != bytes.size()) {
      throw Error(Errc::kParseError, path.string() + ": size disagrees with header");
    }
  }
  std::vector<std::uint16_t> out(bytes.size() / 2);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = load_u16(bytes.data() + 2 * i);
  if (header != nullptr) *header = h;
  return out;
}

/// Sparse occupancy list: little-endian (uint32 flat index, uint32 class)
/// records, flat index in x-slowest order. Unlisted voxels are empty. Other
/// annotation layouts (per-axis coordinate rows, dense arrays) are rejected
/// with a ParseError naming the expected form.
inline SemanticVolume decode_sparse_occupancy(const std::vector<std::uint8_t>& bytes,
                                              const std::array<int, 3>& dims,
                                              const std::string& name = "occupancy") {
  if (bytes.size() % 8 != 0) {
    throw Error(Errc::kParseError, name + ": expected (uint32 index, uint32 class) "
                                          "records; other layouts are not supported");
  }
  SemanticVolume vol(dims, kEmptyClass);
  for (std::size_t off = 0; off < bytes.size(); off += 8) {
    const std::uint32_t index = load_u32(bytes.data() + off);
    const std::uint32_t cls = load_u32(bytes.data() + off + 4);
    if (index >= vol.size() || cls > 0xffff) {
      throw Error(Errc::kParseError, name + ": record " + std::to_string(off / 8) +
                                         " out of range");
    }
    vol.data()[index] = static_cast<std::uint16_t>(cls);
  }
  return vol;
}

inline SemanticVolume read_sparse_occupancy(const fs::path& path,
                                            const std::array<int, 3>& dims) {
  return decode_sparse_occupancy(read_bytes(path), dims, path.string());
}

// ---------------------------------------------------------------------------
// Camera rigs as JSON:
//   {"cameras": [{"fx", "fy", "cx", "cy", "width", "height",
//                 "world_to_camera": [16 numbers, row-major]}, ...]}

inline nlohmann::ordered_json rig_to_json(const CameraRig& rig) {
  nlohmann::ordered_json cams = nlohmann::ordered_json::array();
  for (const auto& c : rig) {
    std::vector<double> t;
    for (int r = 0; r < 4; ++r) {
      for (int k = 0; k < 4; ++k) t.push_back(c.world_to_camera(r, k));
    }
    cams.push_back({{"fx", c.fx()},
                    {"fy", c.fy()},
                    {"cx", c.cx()},
                    {"cy", c.cy()},
                    {"width", c.width},
                    {"height", c.height},
                    {"world_to_camera", t}});
  }
  return {{"cameras", cams}};
}

inline CameraRig rig_from_json(const nlohmann::json& j) {
  CameraRig rig;
  try {
    for (const auto& c : j.at("cameras")) {
      const auto t = c.at("world_to_camera").get<std::vector<double>>();
      if (t.size() != 16) throw Error(Errc::kParseError, "world_to_camera needs 16 values");
      Eigen::Matrix4d m;
      for (int r = 0; r < 4; ++r) {
        for (int k = 0; k < 4; ++k) m(r, k) = t[static_cast<std::size_t>(4 * r + k)];
      }
      rig.push_back(CameraModel::pinhole(c.at("fx").get<double>(), c.at("fy").get<double>(),
                                         c.at("cx").get<double>(), c.at("cy").get<double>(),
                                         c.at("width").get<int>(), c.at("height").get<int>(),
                                         m));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::kParseError, std::string("camera rig: ") + e.what());
  }
  return rig;
}

inline CameraRig read_rig(const fs::path& path) {
  try {
    return rig_from_json(nlohmann::json::parse(read_text(path)));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(Errc::kParseError, path.string() + ": " + e.what());
  }
}

inline void write_rig(const fs::path& path, const CameraRig& rig) {
  const std::string text = rig_to_json(rig).dump(2) + "\n";
  write_bytes(path, {text.begin(), text.end()});
}

}  // namespace mrvox::io

#endif  // MRVOX_IO_HPP
