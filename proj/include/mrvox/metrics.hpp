// Copyright 2026 The mrvox Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef MRVOX_METRICS_HPP
#define MRVOX_METRICS_HPP

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mrvox/error.hpp"

namespace mrvox {

struct MetricsReport {
  double iou = 0.0;  // geometric, occupied vs empty
  /// Per semantic class (index = class id); nullopt when the class has an
  /// empty union. Entry 0 (the empty class) is always nullopt.
  std::vector<std::optional<double>> per_class_iou;
  double miou = 0.0;  // mean over defined entries
  std::size_t evaluated_voxels = 0;
};

/// IoU over the occupied (class != empty_class) masks and per-class IoU for
/// classes 1..num_classes-1. Voxels flagged in `ignore` are excluded from
/// every count; an empty span ignores nothing. Classes whose union is zero
/// are left out of the mean.
inline MetricsReport compute_metrics(std::span<const std::uint16_t> pred,
                                     std::span<const std::uint16_t> gt,
                                     std::span<const std::uint8_t> ignore,
                                     std::size_t num_classes,
                                     std::uint16_t empty_class = 0) {
  if (pred.size() != gt.size() || (!ignore.empty() && ignore.size() != gt.size())) {
    throw Error(Errc::kDimMismatch, "prediction, ground truth and mask differ "
                                    "in size");
  }
  std::vector<std::size_t> inter(num_classes, 0);
  std::vector<std::size_t> uni(num_classes, 0);
  std::size_t occ_inter = 0;
  std::size_t occ_union = 0;
  MetricsReport report;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    if (!ignore.empty() && ignore[i] != 0) continue;
    ++report.evaluated_voxels;
    const std::uint16_t p = pred[i];
    const std::uint16_t g = gt[i];
    const bool p_occ = p != empty_class;
    const bool g_occ = g != empty_class;
    occ_inter += (p_occ && g_occ) ? 1 : 0;
    occ_union += (p_occ || g_occ) ? 1 : 0;
    if (p == g) {
      if (p < num_classes) {
        ++inter[p];
        ++uni[p];
      }
    } else {
      if (p < num_classes) ++uni[p];
      if (g < num_classes) ++uni[g];
    }
  }
  report.iou = occ_union == 0 ? 1.0
                              : static_cast<double>(occ_inter) /
                                    static_cast<double>(occ_union);
  report.per_class_iou.assign(num_classes, std::nullopt);
  double sum = 0.0;
  std::size_t defined = 0;
  for (std::size_t c = 0; c < num_classes; ++c) {
    if (c == empty_class || uni[c] == 0) continue;
    const double v = static_cast<double>(inter[c]) / static_cast<double>(uni[c]);
    report.per_class_iou[c] = v;
    sum += v;
    ++defined;
  }
  // No class with a non-empty union means both volumes are empty.
  report.miou = defined == 0 ? 1.0 : sum / static_cast<double>(defined);
  return report;
}

/// Ignore mask from ground-truth voxels carrying the unknown label.
inline std::vector<std::uint8_t> unknown_mask(std::span<const std::uint16_t> gt,
                                              std::uint16_t unknown = 255) {
  std::vector<std::uint8_t> mask(gt.size(), 0);
  for (std::size_t i = 0; i < gt.size(); ++i) mask[i] = gt[i] == unknown ? 1 : 0;
  return mask;
}

}  // namespace mrvox

#endif  // MRVOX_METRICS_HPP
