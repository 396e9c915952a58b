// Copyright 2026 The mrvox Authors
// SPDX-License-Identifier: Apache-2.0
//
// Training objective terms, evaluated forward-only on probability tables:
// cross-entropy, Lovasz-Softmax, the scene- and class-wise affinity losses
// (geo_scal / sem_scal), binary cross-entropy for the importance estimator
// and the 3-way occlusion cross-entropy. The total is their weighted sum
// (unit weights by default).
//
// Conventions: labels equal to kIgnoreLabel are dropped before any term is
// computed; class 0 is "empty" and takes part in every term like any other
// class. Every log argument is clamped at kProbClamp; each term reports how
// many clamps it needed.

#ifndef MRVOX_LOSSES_HPP
#define MRVOX_LOSSES_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "mrvox/error.hpp"

namespace mrvox {

inline constexpr int kIgnoreLabel = 255;
inline constexpr double kProbClamp = 1e-12;

/// N x K row-major class probabilities.
struct ProbTable {
  std::size_t num_classes = 0;
  std::vector<double> values;

  ProbTable() = default;
  ProbTable(std::size_t n, std::size_t k, double fill = 0.0)
      : num_classes(k), values(n * k, fill) {}

  [[nodiscard]] std::size_t rows() const {
    return num_classes == 0 ? 0 : values.size() / num_classes;
  }
  [[nodiscard]] std::span<const double> row(std::size_t i) const {
    return {values.data() + i * num_classes, num_classes};
  }
  [[nodiscard]] std::span<double> row(std::size_t i) {
    return {values.data() + i * num_classes, num_classes};
  }
  double& at(std::size_t i, std::size_t k) { return values[i * num_classes + k]; }
  [[nodiscard]] double at(std::size_t i, std::size_t k) const {
    return values[i * num_classes + k];
  }

  /// Row-wise softmax of logits.
  static ProbTable softmax(std::span<const double> logits, std::size_t k) {
    ProbTable t(logits.size() / k, k);
    for (std::size_t i = 0; i < t.rows(); ++i) {
      const auto l = logits.subspan(i * k, k);
      const double m = *std::max_element(l.begin(), l.end());
      double sum = 0.0;
      for (std::size_t c = 0; c < k; ++c) {
        t.at(i, c) = std::exp(l[c] - m);
        sum += t.at(i, c);
      }
      for (std::size_t c = 0; c < k; ++c) t.at(i, c) /= sum;
    }
    return t;
  }

  static ProbTable one_hot(std::span<const int> labels, std::size_t k) {
    ProbTable t(labels.size(), k);
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] >= 0 && static_cast<std::size_t>(labels[i]) < k) {
        t.at(i, static_cast<std::size_t>(labels[i])) = 1.0;
      }
    }
    return t;
  }
};

/// A loss value and the number of log arguments that had to be clamped.
struct LossTerm {
  double value = 0.0;
  std::size_t clamped = 0;
};

namespace detail {

inline double clamped_log(double p, std::size_t& clamped) {
  if (p < kProbClamp) {
    ++clamped;
    p = kProbClamp;
  }
  return std::log(p);
}

/// Rows with a usable label.
inline std::vector<std::size_t> labeled_rows(const ProbTable& probs,
                                             std::span<const int> labels) {
  if (labels.size() != probs.rows()) {
    throw Error(Errc::kShapeError, std::to_string(labels.size()) +
                                       " labels for " +
                                       std::to_string(probs.rows()) + " rows");
  }
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == kIgnoreLabel) continue;
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= probs.num_classes) {
      throw Error(Errc::kShapeError, "label " + std::to_string(labels[i]) +
                                         " out of range");
    }
    rows.push_back(i);
  }
  if (rows.empty()) throw Error(Errc::kNoLabels, "no labeled voxels");
  return rows;
}

}  // namespace detail

/// Mean of -log p(true class) over labeled rows.
inline LossTerm cross_entropy(const ProbTable& probs,
                              std::span<const int> labels) {
  const auto rows = detail::labeled_rows(probs, labels);
  LossTerm t;
  double sum = 0.0;
  for (std::size_t i : rows) {
    sum -= detail::clamped_log(
        probs.at(i, static_cast<std::size_t>(labels[i])), t.clamped);
  }
  t.value = sum / static_cast<double>(rows.size());
  return t;
}

/// d(cross_entropy)/d(probs); zero except at the true class of labeled rows.
/// Unclamped.
inline ProbTable cross_entropy_grad(const ProbTable& probs,
                                    std::span<const int> labels) {
  const auto rows = detail::labeled_rows(probs, labels);
  ProbTable g(probs.rows(), probs.num_classes);
  const double n = static_cast<double>(rows.size());
  for (std::size_t i : rows) {
    const auto k = static_cast<std::size_t>(labels[i]);
    g.at(i, k) = -1.0 / (n * probs.at(i, k));
  }
  return g;
}

/// Gradient of the Lovasz extension of the Jaccard loss with respect to
/// errors sorted in decreasing order; `fg_sorted` is the foreground
/// indicator in that order.
inline std::vector<double> lovasz_grad(std::span<const double> fg_sorted) {
  const double gts = std::accumulate(fg_sorted.begin(), fg_sorted.end(), 0.0);
  std::vector<double> jaccard(fg_sorted.size());
  double cum_fg = 0.0;
  double cum_bg = 0.0;
  for (std::size_t i = 0; i < fg_sorted.size(); ++i) {
    cum_fg += fg_sorted[i];
    cum_bg += 1.0 - fg_sorted[i];
    const double intersection = gts - cum_fg;
    const double uni = gts + cum_bg;
    jaccard[i] = 1.0 - intersection / uni;
  }
  for (std::size_t i = jaccard.size(); i-- > 1;) jaccard[i] -= jaccard[i - 1];
  return jaccard;
}

/// Mean over classes present in the labels of the Lovasz-extended Jaccard
/// loss on the per-voxel errors |[label == c] - p_c|.
inline LossTerm lovasz_softmax(const ProbTable& probs,
                               std::span<const int> labels) {
  const auto rows = detail::labeled_rows(probs, labels);
  double total = 0.0;
  std::size_t present = 0;
  std::vector<std::size_t> order(rows.size());
  std::vector<double> errors(rows.size());
  std::vector<double> fg(rows.size());
  std::vector<double> errors_sorted(rows.size());
  std::vector<double> fg_sorted(rows.size());
  for (std::size_t c = 0; c < probs.num_classes; ++c) {
    double fg_count = 0.0;
    for (std::size_t j = 0; j < rows.size(); ++j) {
      fg[j] = labels[rows[j]] == static_cast<int>(c) ? 1.0 : 0.0;
      errors[j] = std::abs(fg[j] - probs.at(rows[j], c));
      fg_count += fg[j];
    }
    if (fg_count == 0.0) continue;
    ++present;
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&errors](std::size_t a, std::size_t b) {
                       return errors[a] > errors[b];
                     });
    for (std::size_t j = 0; j < order.size(); ++j) {
      errors_sorted[j] = errors[order[j]];
      fg_sorted[j] = fg[order[j]];
    }
    const auto grad = lovasz_grad(fg_sorted);
    double loss = 0.0;
    for (std::size_t j = 0; j < grad.size(); ++j) {
      loss += errors_sorted[j] * grad[j];
    }
    total += loss;
  }
  return {total / static_cast<double>(present), 0};
}

/// Scene-level affinity loss on the occupied (class != 0) vs empty split:
///   -log(precision) - log(recall) - log(specificity)
/// of the soft occupancy p_occ = 1 - p_empty. Terms whose denominator is
/// zero are skipped.
inline LossTerm geo_scal(const ProbTable& probs, std::span<const int> labels) {
  const auto rows = detail::labeled_rows(probs, labels);
  double inter = 0.0;
  double pred_mass = 0.0;
  double target_mass = 0.0;
  double empty_inter = 0.0;
  double empty_target = 0.0;
  for (std::size_t i : rows) {
    const double p_empty = probs.at(i, 0);
    const double p_occ = 1.0 - p_empty;
    const double t = labels[i] != 0 ? 1.0 : 0.0;
    inter += p_occ * t;
    pred_mass += p_occ;
    target_mass += t;
    empty_inter += p_empty * (1.0 - t);
    empty_target += 1.0 - t;
  }
  // A ratio with a zero denominator is undefined and its term is skipped.
  LossTerm term;
  if (pred_mass > 0.0) term.value -= detail::clamped_log(inter / pred_mass, term.clamped);
  if (target_mass > 0.0) {
    term.value -= detail::clamped_log(inter / target_mass, term.clamped);
  }
  if (empty_target > 0.0) {
    term.value -= detail::clamped_log(empty_inter / empty_target, term.clamped);
  }
  return term;
}

/// Class-level affinity loss: for each class present in the labels,
///   -log(precision) - log(recall) - log(specificity)
/// of its soft mass, dropping precision when the class has no predicted mass
/// and specificity when every voxel belongs to it; averaged over classes.
inline LossTerm sem_scal(const ProbTable& probs, std::span<const int> labels) {
  const auto rows = detail::labeled_rows(probs, labels);
  LossTerm term;
  double total = 0.0;
  std::size_t counted = 0;
  for (std::size_t c = 0; c < probs.num_classes; ++c) {
    double inter = 0.0;
    double pred_mass = 0.0;
    double target_mass = 0.0;
    double neg_inter = 0.0;
    double neg_mass = 0.0;
    for (std::size_t i : rows) {
      const double p = probs.at(i, c);
      const double t = labels[i] == static_cast<int>(c) ? 1.0 : 0.0;
      inter += p * t;
      pred_mass += p;
      target_mass += t;
      neg_inter += (1.0 - p) * (1.0 - t);
      neg_mass += 1.0 - t;
    }
    if (target_mass == 0.0) continue;
    ++counted;
    double loss = 0.0;
    if (pred_mass > 0.0) {
      loss -= detail::clamped_log(inter / pred_mass, term.clamped);
    }
    loss -= detail::clamped_log(inter / target_mass, term.clamped);
    if (neg_mass > 0.0) {
      loss -= detail::clamped_log(neg_inter / neg_mass, term.clamped);
    }
    total += loss;
  }
  term.value = total / static_cast<double>(counted);
  return term;
}

/// Mean binary cross-entropy of importance scores against 0/1 targets.
inline LossTerm binary_cross_entropy(std::span<const double> scores,
                                     std::span<const double> targets) {
  if (scores.size() != targets.size()) {
    throw Error(Errc::kShapeError, "scores and targets differ in length");
  }
  if (scores.empty()) throw Error(Errc::kNoLabels, "no scored voxels");
  LossTerm t;
  double sum = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const double y = targets[i];
    if (y != 0.0) sum -= y * detail::clamped_log(scores[i], t.clamped);
    if (y != 1.0) sum -= (1.0 - y) * detail::clamped_log(1.0 - scores[i], t.clamped);
  }
  t.value = sum / static_cast<double>(scores.size());
  return t;
}

inline std::vector<double> binary_cross_entropy_grad(
    std::span<const double> scores, std::span<const double> targets) {
  if (scores.size() != targets.size() || scores.empty()) {
    throw Error(Errc::kShapeError, "scores and targets differ in length");
  }
  std::vector<double> g(scores.size());
  const double n = static_cast<double>(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const double s = scores[i];
    const double y = targets[i];
    g[i] = (-(y / s) + (1.0 - y) / (1.0 - s)) / n;
  }
  return g;
}

/// Cross-entropy over {empty, non-occluded, occluded}.
inline LossTerm occlusion_cross_entropy(const ProbTable& probs,
                                        std::span<const int> labels) {
  if (probs.num_classes != 3) {
    throw Error(Errc::kShapeError, "occlusion probabilities have 3 classes");
  }
  return cross_entropy(probs, labels);
}

struct LossWeights {
  double ce = 1.0;
  double lovasz = 1.0;
  double geo_scal = 1.0;
  double sem_scal = 1.0;
  double rie_bce = 1.0;
  double occlusion_ce = 1.0;
};

struct LossReport {
  LossTerm ce;
  LossTerm lovasz;
  LossTerm geo_scal;
  LossTerm sem_scal;
  LossTerm rie_bce;
  LossTerm occlusion_ce;
  double total = 0.0;
};

struct LossInputs {
  ProbTable semantic_probs;
  std::vector<int> semantic_labels;
  std::vector<double> importance_scores;
  std::vector<double> importance_targets;
  ProbTable occlusion_probs;
  std::vector<int> occlusion_labels;
};

inline LossReport compute_losses(const LossInputs& in,
                                 const LossWeights& w = {}) {
  LossReport r;
  r.ce = cross_entropy(in.semantic_probs, in.semantic_labels);
  r.lovasz = lovasz_softmax(in.semantic_probs, in.semantic_labels);
  r.geo_scal = geo_scal(in.semantic_probs, in.semantic_labels);
  r.sem_scal = sem_scal(in.semantic_probs, in.semantic_labels);
  r.rie_bce = binary_cross_entropy(in.importance_scores, in.importance_targets);
  r.occlusion_ce = occlusion_cross_entropy(in.occlusion_probs, in.occlusion_labels);
  r.total = w.ce * r.ce.value + w.lovasz * r.lovasz.value +
            w.geo_scal * r.geo_scal.value + w.sem_scal * r.sem_scal.value +
            w.rie_bce * r.rie_bce.value + w.occlusion_ce * r.occlusion_ce.value;
  return r;
}

}  // namespace mrvox

#endif  // MRVOX_LOSSES_HPP
