// Copyright 2026 The mrvox Authors
// SPDX-License-Identifier: Apache-2.0
//
// Pixel-to-voxel fusion. Voxel queries are seeded with the densified LiDAR
// features, projected into every camera, and a single-head deformable
// attention samples n_ref offset locations around each projection. The
// per-camera results are averaged over the cameras that see the voxel.

#ifndef MRVOX_FUSION_HPP
#define MRVOX_FUSION_HPP

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "mrvox/camera.hpp"
#include "mrvox/error.hpp"
#include "mrvox/linear.hpp"
#include "mrvox/random.hpp"
#include "mrvox/voxel_core.hpp"

namespace mrvox {

struct DeformableAttnParams {
  std::size_t n_ref = 4;
  std::vector<Eigen::Vector2d> offsets;  // pixels, one per reference point
  std::vector<double> weight_logits;     // one per reference point
  LinearMap value_proj;                  // C_I -> C
  LinearMap output_proj;                 // C -> C
  /// Adds the guided query to the attention output.
  bool residual = true;
  /// When set, offsets += offset_proj(query) reshaped to n_ref x 2.
  bool query_conditioned_offsets = false;
  LinearMap offset_proj;  // C -> 2 * n_ref
  std::uint64_t seed = 0;

  /// Softmax of the logits.
  [[nodiscard]] std::vector<double> attention_weights() const {
    std::vector<double> w(weight_logits.size());
    if (w.empty()) return w;
    const double m = *std::max_element(weight_logits.begin(), weight_logits.end());
    double sum = 0.0;
    for (std::size_t j = 0; j < w.size(); ++j) {
      w[j] = std::exp(weight_logits[j] - m);
      sum += w[j];
    }
    for (double& x : w) x /= sum;
    return w;
  }

  void validate(std::size_t image_channels, std::size_t channels) const {
    if (offsets.size() != n_ref || weight_logits.size() != n_ref) {
      throw Error(Errc::kShapeError, "offsets/logits must have n_ref entries");
    }
    if (value_proj.in_dim() != image_channels ||
        value_proj.out_dim() != channels) {
      throw Error(Errc::kShapeError, "value projection shape");
    }
    if (output_proj.in_dim() != channels || output_proj.out_dim() != channels) {
      throw Error(Errc::kShapeError, "output projection shape");
    }
    if (query_conditioned_offsets &&
        (offset_proj.in_dim() != channels || offset_proj.out_dim() != 2 * n_ref)) {
      throw Error(Errc::kShapeError, "offset projection shape");
    }
  }

  /// Offsets uniform in [-2, 2] px, logits N(0, 1), seeded projections.
  static DeformableAttnParams seeded(std::size_t image_channels,
                                     std::size_t channels, std::size_t n_ref,
                                     std::uint64_t seed) {
    DeformableAttnParams p;
    p.n_ref = n_ref;
    p.seed = seed;
    Rng rng(split_seed(seed, "offsets"));
    for (std::size_t j = 0; j < n_ref; ++j) {
      const double du = rng.uniform(-2.0, 2.0);
      const double dv = rng.uniform(-2.0, 2.0);
      p.offsets.emplace_back(du, dv);
      p.weight_logits.push_back(rng.normal());
    }
    p.value_proj = LinearMap::seeded(image_channels, channels,
                                     split_seed(seed, "value"));
    p.output_proj = LinearMap::seeded(channels, channels,
                                      split_seed(seed, "output"));
    p.offset_proj = LinearMap::seeded(channels, 2 * n_ref,
                                      split_seed(seed, "offset_proj"));
    return p;
  }

  /// Identity projections (requires C_I == C) with the given sampling
  /// pattern.
  static DeformableAttnParams identity(std::size_t channels,
                                       std::vector<Eigen::Vector2d> offsets,
                                       std::vector<double> logits) {
    DeformableAttnParams p;
    p.n_ref = offsets.size();
    p.offsets = std::move(offsets);
    p.weight_logits = std::move(logits);
    p.value_proj = LinearMap::identity(channels);
    p.output_proj = LinearMap::identity(channels);
    p.offset_proj = LinearMap::zeros(channels, 2 * p.n_ref);
    return p;
  }
};

/// Base queries Q_v and LiDAR-guided queries Q'_v = densified + Q_v over the
/// non-empty set of the densified grid.
struct QuerySet {
  SparseVoxelGrid base;
  SparseVoxelGrid guided;
};

/// Base queries drawn per voxel from (seed, coordinate), uniform in
/// [-0.1, 0.1], so they do not depend on row order.
inline SparseVoxelGrid seeded_base_queries(const SparseVoxelGrid& dense,
                                           std::uint64_t seed) {
  SparseVoxelGrid base(dense.geometry(), dense.channels());
  base.reserve(dense.size());
  for (const auto& v : dense.coords()) {
    const std::size_t r = base.insert_zero(v);
    Rng rng(splitmix64(seed ^ splitmix64(pack_key(v))));
    for (double& x : base.row(r)) x = rng.uniform(-0.1, 0.1);
  }
  return base;
}

/// Q'_v = dense + base. Voxels missing from `base` use a zero query.
inline QuerySet guide_queries(const SparseVoxelGrid& dense,
                              const SparseVoxelGrid& base) {
  if (dense.scale() != 4) {
    throw Error(Errc::kInvalidScale, "queries live at scale 4");
  }
  if (base.channels() != dense.channels()) {
    throw Error(Errc::kShapeError, "query width differs from feature width");
  }
  QuerySet qs{SparseVoxelGrid(dense.geometry(), dense.channels()),
              SparseVoxelGrid(dense.geometry(), dense.channels())};
  qs.base.reserve(dense.size());
  qs.guided.reserve(dense.size());
  for (std::size_t r = 0; r < dense.size(); ++r) {
    const VoxelIndex& v = dense.coord(r);
    const std::size_t rb = qs.base.insert_zero(v);
    const std::size_t rg = qs.guided.insert(v, dense.row(r));
    if (const auto src = base.lookup(v)) {
      const auto q = base.row(*src);
      std::copy(q.begin(), q.end(), qs.base.row(rb).begin());
      auto g = qs.guided.row(rg);
      for (std::size_t c = 0; c < g.size(); ++c) g[c] += q[c];
    }
  }
  return qs;
}

inline QuerySet guide_queries(const SparseVoxelGrid& dense,
                              std::uint64_t seed) {
  return guide_queries(dense, seeded_base_queries(dense, seed));
}

struct FusionResult {
  SparseVoxelGrid fused;   // F_M^4
  std::size_t misses = 0;  // voxels seen by no camera
};

inline FusionResult fuse(const QuerySet& queries, const CameraRig& rig,
                         const FeatureMap2D& maps,
                         const DeformableAttnParams& params) {
  const SparseVoxelGrid& q = queries.guided;
  const std::size_t c = q.channels();
  const std::size_t ci = maps.channels();
  maps.validate();
  params.validate(ci, c);
  if (maps.images.size() != rig.size()) {
    throw Error(Errc::kShapeError, "one feature map per camera required");
  }

  const std::vector<double> w = params.attention_weights();
  FusionResult result{SparseVoxelGrid(q.geometry(), c), 0};
  result.fused.reserve(q.size());

  std::vector<double> first(ci);
  std::vector<double> tap(ci);
  std::vector<double> sampled(ci);
  std::vector<double> value(c);
  std::vector<double> cam_out(c);
  std::vector<double> first_cam(c);
  std::vector<double> total(c);
  std::vector<double> dyn_offsets(2 * params.n_ref);

  for (std::size_t r = 0; r < q.size(); ++r) {
    const VoxelIndex& v = q.coord(r);
    const auto query = q.row(r);
    const Eigen::Vector3d center = voxel_center(v, q.geometry());
    if (params.query_conditioned_offsets) {
      params.offset_proj.apply(query, dyn_offsets);
    }

    // Convex combinations are accumulated as x0 + sum w_k (x_k - x0), which
    // equals sum w_k x_k when the weights sum to one and reproduces equal
    // inputs exactly.
    std::fill(total.begin(), total.end(), 0.0);
    std::size_t hits = 0;
    for (std::size_t cam = 0; cam < rig.size(); ++cam) {
      const auto hit = project(rig[cam], center);
      if (!hit) continue;
      for (std::size_t j = 0; j < params.n_ref; ++j) {
        double du = params.offsets[j].x();
        double dv = params.offsets[j].y();
        if (params.query_conditioned_offsets) {
          du += dyn_offsets[2 * j];
          dv += dyn_offsets[2 * j + 1];
        }
        // Sampling locations are clamped to the pixel-center domain so every
        // sample is a convex combination of real pixels.
        const ImageFeatures& im = maps.images[cam];
        const double su = std::clamp(hit->u + du, 0.0, im.width - 1.0);
        const double sv = std::clamp(hit->v + dv, 0.0, im.height - 1.0);
        auto& dst = j == 0 ? first : tap;
        bilinear_sample_into(im, su, sv, dst);
        if (j == 0) {
          sampled = first;
        } else {
          for (std::size_t k = 0; k < ci; ++k) {
            sampled[k] += w[j] * (tap[k] - first[k]);
          }
        }
      }
      params.value_proj.apply(sampled, value);
      params.output_proj.apply(value, cam_out);
      ++hits;
      if (hits == 1) {
        first_cam = cam_out;
      } else {
        for (std::size_t k = 0; k < c; ++k) {
          total[k] += (cam_out[k] - first_cam[k]);
        }
      }
    }

    const std::size_t out_row = result.fused.insert_zero(v);
    auto out = result.fused.row(out_row);
    if (hits == 0) {
      ++result.misses;
    } else {
      // total holds sum_{i>0} (x_i - x0); the mean is x0 + total / n.
      const double n = static_cast<double>(hits);
      for (std::size_t k = 0; k < c; ++k) {
        out[k] = first_cam[k] + total[k] / n;
      }
    }
    if (params.residual) {
      for (std::size_t k = 0; k < c; ++k) out[k] += query[k];
    }
  }
  return result;
}

}  // namespace mrvox

#endif  // MRVOX_FUSION_HPP
