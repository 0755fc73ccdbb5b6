#pragma once

#include <cstdint>
#include <vector>

#include "oasic/imaging.hpp"

namespace oasic {

inline constexpr int kDefaultLevels = 256;

/// Counts over L uniform bins partitioning [0, 1]; value v falls in bin
/// min(L - 1, floor(v * L)).
struct Histogram {
  std::vector<std::uint64_t> bins;
  std::uint64_t total = 0;

  static Histogram of(const AnomalyMap& map, int levels = kDefaultLevels);
  static int bin_of(float value, int levels);

  int levels() const { return static_cast<int>(bins.size()); }
};

/// O(i,j) = 1 iff A(i,j) >= tau.
OcclusionMask threshold_fixed(const AnomalyMap& map, double tau);

struct OtsuResult {
  double threshold = 0.0;  // upper edge of the best bin, (t + 1) / L
  int best_bin = 0;
  /// sigma_b^2(t) for t = 0 .. L-1, in squared bin-index units; 0 where
  /// either class is empty.
  std::vector<double> between_class_variance;
};

/// Otsu's threshold over the normalized L-bin histogram: argmax over t of
/// w0 w1 (mu0 - mu1)^2, smallest t on ties. If no split separates anything
/// (single occupied bin), returns the upper edge of the occupied bin so a
/// constant map thresholds to all zeros (all ones only for a map of 1.0).
OtsuResult otsu(const AnomalyMap& map, int levels = kDefaultLevels);

inline double otsu_threshold(const AnomalyMap& map, int levels = kDefaultLevels) {
  return otsu(map, levels).threshold;
}

}  // namespace oasic
