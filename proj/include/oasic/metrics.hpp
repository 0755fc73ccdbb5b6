#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "oasic/error.hpp"

namespace oasic {

/// Accuracy as a function of occlusion level; levels strictly increasing.
struct EvalCurve {
  std::vector<double> levels;
  std::vector<double> accuracies;

  friend bool operator==(const EvalCurve&, const EvalCurve&) = default;
};

/// Mann-Whitney AUROC: the fraction of (positive, negative) pairs ranked
/// correctly, ties counted as 1/2. Needs both classes present.
double auroc(std::span<const double> scores, std::span<const std::uint8_t> labels);

/// Step-wise AP: sum over positives of precision at their rank, divided by
/// the positive count. Ranking is by descending score, ties in input order.
double average_precision(std::span<const double> scores, std::span<const std::uint8_t> labels);

/// Trapezoidal area under the accuracy curve divided by the level span.
double auc_occ(const EvalCurve& curve);

template <typename T>
double accuracy(std::span<const T> predictions, std::span<const T> labels) {
  require(predictions.size() == labels.size(), "accuracy: length mismatch");
  require(!labels.empty(), "accuracy: empty input");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hits += predictions[i] == labels[i] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

}  // namespace oasic
