// Copyright 2026 The mrvox Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef MRVOX_LINEAR_HPP
#define MRVOX_LINEAR_HPP

#include <Eigen/Core>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mrvox/error.hpp"
#include "mrvox/random.hpp"

namespace mrvox {

/// y = W x + b. Stands in for 1x1 convolutions and per-voxel projections.
struct LinearMap {
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;    // out

  [[nodiscard]] std::size_t in_dim() const {
    return static_cast<std::size_t>(weight.cols());
  }
  [[nodiscard]] std::size_t out_dim() const {
    return static_cast<std::size_t>(weight.rows());
  }

  void apply(std::span<const double> x, std::span<double> y) const {
    if (x.size() != in_dim() || y.size() != out_dim()) {
      throw Error(Errc::kShapeError,
                  "linear map " + std::to_string(in_dim()) + "->" +
                      std::to_string(out_dim()) + " applied to " +
                      std::to_string(x.size()) + "->" +
                      std::to_string(y.size()));
    }
    const Eigen::Map<const Eigen::VectorXd> xv(x.data(),
                                               static_cast<Eigen::Index>(x.size()));
    Eigen::Map<Eigen::VectorXd> yv(y.data(), static_cast<Eigen::Index>(y.size()));
    yv.noalias() = weight * xv + bias;
  }

  [[nodiscard]] std::vector<double> operator()(std::span<const double> x) const {
    std::vector<double> y(out_dim());
    apply(x, y);
    return y;
  }

  static LinearMap identity(std::size_t n) {
    return {Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(n),
                                      static_cast<Eigen::Index>(n)),
            Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n))};
  }

  static LinearMap zeros(std::size_t in, std::size_t out) {
    return {Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(out),
                                  static_cast<Eigen::Index>(in)),
            Eigen::VectorXd::Zero(static_cast<Eigen::Index>(out))};
  }

  /// Uniform(-a, a) with a = 1 / sqrt(in); zero bias. Filled row by row.
  static LinearMap seeded(std::size_t in, std::size_t out, std::uint64_t seed) {
    LinearMap m = zeros(in, out);
    Rng rng(seed);
    const double a = 1.0 / std::sqrt(static_cast<double>(in == 0 ? 1 : in));
    for (Eigen::Index r = 0; r < m.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.weight.cols(); ++c) {
        m.weight(r, c) = rng.uniform(-a, a);
      }
    }
    return m;
  }
};

}  // namespace mrvox

#endif  // MRVOX_LINEAR_HPP
