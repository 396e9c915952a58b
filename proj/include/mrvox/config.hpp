// Copyright 2026 The mrvox Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef MRVOX_CONFIG_HPP
#define MRVOX_CONFIG_HPP

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <type_traits>

#include "mrvox/error.hpp"
#include "mrvox/hvfr.hpp"
#include "mrvox/io.hpp"
#include "mrvox/random.hpp"
#include "mrvox/voxel_core.hpp"

namespace mrvox {

/// Everything a pipeline run depends on. Stored as an INI file:
///
///   [grid]     preset, origin, voxel_size, dims   (the last three for custom)
///   [model]    channels, image_channels, n_ref
///   [hvfr]     tau1, tau2, scorer (rie | oracle)
///   [labels]   camera_stride
///   [seed]     root
///   [paths]    dataset_root, output_dir
///
/// Unknown sections or keys are rejected.
struct PipelineConfig {
  std::string preset = "custom";  // nuscenes-occ | semantickitti | custom
  GridGeometry geometry{Eigen::Vector3d(-12.8, -12.8, -1.6), 0.2, {128, 128, 16}, 1};
  std::size_t channels = 16;
  std::size_t image_channels = 8;
  std::size_t n_ref = 4;
  double tau1 = kDefaultTau1;
  double tau2 = kDefaultTau2;
  std::string scorer = "rie";
  int camera_stride = 4;
  std::uint64_t seed = 0;
  std::string dataset_root;
  std::string output_dir = "mrvox_out";

  /// Seed for one named consumer; all randomness derives from `seed`.
  [[nodiscard]] std::uint64_t seed_for(std::string_view name) const {
    return split_seed(seed, name);
  }

  void validate() const {
    const auto fail = [](const std::string& msg) { throw Error(Errc::kConfigError, msg); };
    if (preset != "nuscenes-occ" && preset != "semantickitti" && preset != "custom") {
      fail("unknown grid preset '" + preset + "'");
    }
    for (int d : geometry.dims_scale1) {
      if (d <= 0 || d % 4 != 0) fail("grid dims must be positive multiples of 4");
    }
    if (!(geometry.voxel_size > 0.0) || !std::isfinite(geometry.voxel_size)) {
      fail("voxel_size must be positive");
    }
    if (!geometry.origin.allFinite()) fail("origin must be finite");
    if (channels < kVoxelizeChannels) fail("channels must be at least 5");
    if (image_channels == 0) fail("image_channels must be positive");
    if (n_ref == 0) fail("n_ref must be positive");
    if (!(tau1 >= 0.0) || !(tau2 >= 0.0) || !std::isfinite(tau1) || !std::isfinite(tau2)) {
      fail("thresholds must be finite and non-negative");
    }
    if (tau2 < tau1) fail("tau2 must not be below tau1");
    if (scorer != "rie" && scorer != "oracle") fail("scorer must be rie or oracle");
    if (camera_stride <= 0) fail("camera_stride must be positive");
  }

  friend bool operator==(const PipelineConfig&, const PipelineConfig&) = default;
};

inline GridGeometry preset_geometry(const std::string& preset) {
  if (preset == "nuscenes-occ") return GridGeometry::nuscenes_occupancy();
  if (preset == "semantickitti") return GridGeometry::semantic_kitti();
  throw Error(Errc::kConfigError, "no built-in geometry for preset '" + preset + "'");
}

namespace detail {

inline const std::map<std::string, std::set<std::string>>& config_schema() {
  static const std::map<std::string, std::set<std::string>> schema = {
      {"grid", {"preset", "origin", "voxel_size", "dims"}},
      {"model", {"channels", "image_channels", "n_ref"}},
      {"hvfr", {"tau1", "tau2", "scorer"}},
      {"labels", {"camera_stride"}},
      {"seed", {"root"}},
      {"paths", {"dataset_root", "output_dir"}},
  };
  return schema;
}

template <typename T>
T parse_value(const std::string& section, const std::string& key, const std::string& text) {
  std::istringstream in(text);
  T value{};
  // Streams wrap "-1" into a huge unsigned value instead of failing.
  const bool negative_unsigned =
      std::is_unsigned_v<T> && text.find('-') != std::string::npos;
  if (negative_unsigned || !(in >> value) || !(in >> std::ws).eof()) {
    throw Error(Errc::kConfigError, section + "." + key + ": cannot parse '" + text + "'");
  }
  return value;
}

template <typename T, std::size_t N>
std::array<T, N> parse_tuple(const std::string& section, const std::string& key,
                             const std::string& text) {
  std::istringstream in(text);
  std::array<T, N> out{};
  for (auto& v : out) {
    if (!(in >> v)) {
      throw Error(Errc::kConfigError, section + "." + key + ": expected " +
                                          std::to_string(N) + " values");
    }
  }
  if (!(in >> std::ws).eof()) {
    throw Error(Errc::kConfigError, section + "." + key + ": trailing text");
  }
  return out;
}

}  // namespace detail

inline PipelineConfig parse_config(const std::string& text,
                                   const std::string& name = "config") {
  boost::property_tree::ptree tree;
  try {
    std::istringstream in(text);
    boost::property_tree::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw Error(Errc::kConfigError, name + ": " + e.what());
  }
  const auto& schema = detail::config_schema();
  for (const auto& [section, body] : tree) {
    const auto it = schema.find(section);
    if (it == schema.end() || !body.data().empty()) {
      throw Error(Errc::kConfigError, name + ": unknown section or top-level key '" +
                                          section + "'");
    }
    for (const auto& [key, value] : body) {
      if (!it->second.contains(key)) {
        throw Error(Errc::kConfigError, name + ": unknown key " + section + "." + key);
      }
    }
  }

  PipelineConfig cfg;
  const auto get = [&](const std::string& section, const std::string& key) {
    return tree.get_optional<std::string>(
        boost::property_tree::ptree::path_type(section + "." + key, '.'));
  };
  if (auto v = get("grid", "preset")) cfg.preset = *v;
  if (cfg.preset != "custom") {
    if (cfg.preset != "nuscenes-occ" && cfg.preset != "semantickitti") {
      throw Error(Errc::kConfigError, name + ": unknown grid preset '" + cfg.preset + "'");
    }
    cfg.geometry = preset_geometry(cfg.preset);
    for (const char* key : {"origin", "voxel_size", "dims"}) {
      if (get("grid", key)) {
        throw Error(Errc::kConfigError, name + ": grid." + key +
                                            " is fixed by preset " + cfg.preset);
      }
    }
  }
  if (auto v = get("grid", "origin")) {
    const auto o = detail::parse_tuple<double, 3>("grid", "origin", *v);
    cfg.geometry.origin = Eigen::Vector3d(o[0], o[1], o[2]);
  }
  if (auto v = get("grid", "voxel_size")) {
    cfg.geometry.voxel_size = detail::parse_value<double>("grid", "voxel_size", *v);
  }
  if (auto v = get("grid", "dims")) {
    cfg.geometry.dims_scale1 = detail::parse_tuple<int, 3>("grid", "dims", *v);
  }
  if (auto v = get("model", "channels")) {
    cfg.channels = detail::parse_value<std::size_t>("model", "channels", *v);
  }
  if (auto v = get("model", "image_channels")) {
    cfg.image_channels = detail::parse_value<std::size_t>("model", "image_channels", *v);
  }
  if (auto v = get("model", "n_ref")) {
    cfg.n_ref = detail::parse_value<std::size_t>("model", "n_ref", *v);
  }
  if (auto v = get("hvfr", "tau1")) cfg.tau1 = detail::parse_value<double>("hvfr", "tau1", *v);
  if (auto v = get("hvfr", "tau2")) cfg.tau2 = detail::parse_value<double>("hvfr", "tau2", *v);
  if (auto v = get("hvfr", "scorer")) cfg.scorer = *v;
  if (auto v = get("labels", "camera_stride")) {
    cfg.camera_stride = detail::parse_value<int>("labels", "camera_stride", *v);
  }
  if (auto v = get("seed", "root")) {
    cfg.seed = detail::parse_value<std::uint64_t>("seed", "root", *v);
  }
  if (auto v = get("paths", "dataset_root")) cfg.dataset_root = *v;
  if (auto v = get("paths", "output_dir")) cfg.output_dir = *v;
  cfg.validate();
  return cfg;
}

/// Canonical text form; parse_config(serialize_config(c)) == c.
inline std::string serialize_config(const PipelineConfig& cfg) {
  boost::property_tree::ptree tree;
  const auto put = [&](const std::string& section, const std::string& key,
                       const std::string& value) {
    tree.put(boost::property_tree::ptree::path_type(section + "." + key, '.'), value);
  };
  const auto num = [](double v) { return io::format_double(v); };
  put("grid", "preset", cfg.preset);
  if (cfg.preset == "custom") {
    const auto& g = cfg.geometry;
    put("grid", "origin", num(g.origin.x()) + " " + num(g.origin.y()) + " " + num(g.origin.z()));
    put("grid", "voxel_size", num(g.voxel_size));
    put("grid", "dims", std::to_string(g.dims_scale1[0]) + " " +
                            std::to_string(g.dims_scale1[1]) + " " +
                            std::to_string(g.dims_scale1[2]));
  }
  put("model", "channels", std::to_string(cfg.channels));
  put("model", "image_channels", std::to_string(cfg.image_channels));
  put("model", "n_ref", std::to_string(cfg.n_ref));
  put("hvfr", "tau1", num(cfg.tau1));
  put("hvfr", "tau2", num(cfg.tau2));
  put("hvfr", "scorer", cfg.scorer);
  put("labels", "camera_stride", std::to_string(cfg.camera_stride));
  put("seed", "root", std::to_string(cfg.seed));
  put("paths", "dataset_root", cfg.dataset_root);
  put("paths", "output_dir", cfg.output_dir);
  std::ostringstream out;
  boost::property_tree::write_ini(out, tree);
  return out.str();
}

inline PipelineConfig load_config(const std::filesystem::path& path) {
  return parse_config(io::read_text(path), path.string());
}

}  // namespace mrvox

#endif  // MRVOX_CONFIG_HPP
