#include "oasic/metrics.hpp"

#include <algorithm>
#include <numeric>

namespace oasic {

namespace {

void check_inputs(std::span<const double> scores, std::span<const std::uint8_t> labels,
                  const char* what) {
  require(scores.size() == labels.size(), std::string(what) + ": length mismatch");
  for (auto l : labels) require(l <= 1, std::string(what) + ": labels must be 0 or 1");
}

}  // namespace

double auroc(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  check_inputs(scores, labels, "auroc");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Walk groups of equal score in ascending order. Each positive beats all
  // negatives in earlier groups and ties with the negatives in its own group.
  double wins = 0.0;
  std::uint64_t neg_below = 0;
  std::uint64_t positives = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    std::uint64_t pos_here = 0;
    std::uint64_t neg_here = 0;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      (labels[order[j]] ? pos_here : neg_here) += 1;
      ++j;
    }
    wins += static_cast<double>(pos_here) * (static_cast<double>(neg_below) + 0.5 * static_cast<double>(neg_here));
    neg_below += neg_here;
    positives += pos_here;
    i = j;
  }
  const std::uint64_t negatives = neg_below;
  if (positives == 0 || negatives == 0) {
    fail(ErrorKind::kInvalidArgument, "auroc: both classes must be present");
  }
  return wins / (static_cast<double>(positives) * static_cast<double>(negatives));
}

double average_precision(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  check_inputs(scores, labels, "average_precision");
  const auto positives = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
  if (positives == 0) fail(ErrorKind::kInvalidArgument, "average_precision: no positives");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  double ap = 0.0;
  std::size_t hits = 0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    if (!labels[order[k]]) continue;
    ++hits;
    ap += static_cast<double>(hits) / static_cast<double>(k + 1);
  }
  return ap / static_cast<double>(positives);
}

double auc_occ(const EvalCurve& curve) {
  const auto& x = curve.levels;
  const auto& y = curve.accuracies;
  require(x.size() == y.size(), "auc_occ: levels and accuracies differ in length");
  require(!x.empty(), "auc_occ: empty curve");
  for (std::size_t i = 0; i < x.size(); ++i) {
    require(x[i] >= 0.0 && x[i] <= 1.0, "auc_occ: level outside [0,1]");
    require(y[i] >= 0.0 && y[i] <= 1.0, "auc_occ: accuracy outside [0,1]");
    if (i > 0) require(x[i] > x[i - 1], "auc_occ: levels must be strictly increasing");
  }
  const double span = x.back() - x.front();
  if (span <= 0.0) fail(ErrorKind::kInvalidArgument, "auc_occ: zero level span");
  double area = 0.0;
  for (std::size_t i = 1; i < x.size(); ++i) area += 0.5 * (y[i] + y[i - 1]) * (x[i] - x[i - 1]);
  return area / span;
}

}  // namespace oasic
