#include "oasic/thresholding.hpp"

#include <algorithm>
#include <cmath>

#include "oasic/error.hpp"

namespace oasic {

int Histogram::bin_of(float value, int levels) {
  const auto b = static_cast<int>(std::floor(static_cast<double>(value) * levels));
  return std::clamp(b, 0, levels - 1);
}

Histogram Histogram::of(const AnomalyMap& map, int levels) {
  require(levels >= 2, "Histogram: need at least 2 levels");
  Histogram h;
  h.bins.assign(static_cast<std::size_t>(levels), 0);
  for (float v : map.values()) ++h.bins[static_cast<std::size_t>(bin_of(v, levels))];
  h.total = map.values().size();
  return h;
}

OcclusionMask threshold_fixed(const AnomalyMap& map, double tau) {
  require(tau >= 0.0 && tau <= 1.0, "threshold_fixed: tau outside [0,1]");
  std::vector<std::uint8_t> bits(map.values().size());
  std::transform(map.values().begin(), map.values().end(), bits.begin(),
                 [tau](float v) { return std::uint8_t{static_cast<double>(v) >= tau}; });
  return OcclusionMask(map.width(), map.height(), std::move(bits));
}

OtsuResult otsu(const AnomalyMap& map, int levels) {
  require(!map.values().empty(), "otsu: empty map");
  const Histogram hist = Histogram::of(map, levels);
  const std::uint64_t n = hist.total;

  std::uint64_t level_sum = 0;  // sum_i i * count(i)
  for (int i = 0; i < levels; ++i) level_sum += static_cast<std::uint64_t>(i) * hist.bins[i];

  // sigma_b^2(t) = (S0 n1 - S1 n0)^2 / (N^2 n0 n1) with n = counts, S = level
  // sums. The argmax compares the integer ratio (S0 n1 - S1 n0)^2 / (n0 n1)
  // exactly in 128-bit arithmetic while that cannot overflow.
  const bool exact = static_cast<long double>(levels) * levels * std::pow(static_cast<long double>(n), 6) <
                     std::pow(2.0L, 127);
  using u128 = unsigned __int128;

  OtsuResult result;
  result.between_class_variance.assign(static_cast<std::size_t>(levels), 0.0);
  std::uint64_t n0 = 0;
  std::uint64_t s0 = 0;
  bool found = false;
  u128 best_num = 0;
  u128 best_den = 1;
  double best_var = 0.0;
  for (int t = 0; t + 1 < levels; ++t) {
    n0 += hist.bins[t];
    s0 += static_cast<std::uint64_t>(t) * hist.bins[t];
    const std::uint64_t n1 = n - n0;
    if (n0 == 0 || n1 == 0) continue;
    const std::uint64_t s1 = level_sum - s0;

    const double w0 = static_cast<double>(n0) / static_cast<double>(n);
    const double w1 = static_cast<double>(n1) / static_cast<double>(n);
    const double mu0 = static_cast<double>(s0) / static_cast<double>(n0);
    const double mu1 = static_cast<double>(s1) / static_cast<double>(n1);
    const double var = w0 * w1 * (mu0 - mu1) * (mu0 - mu1);
    result.between_class_variance[t] = var;

    bool better = false;
    if (exact) {
      const u128 a = static_cast<u128>(s0) * n1;
      const u128 b = static_cast<u128>(s1) * n0;
      const u128 diff = a > b ? a - b : b - a;
      const u128 num = diff * diff;
      const u128 den = static_cast<u128>(n0) * n1;
      better = num * best_den > best_num * den;
      if (better) {
        best_num = num;
        best_den = den;
      }
    } else {
      better = var > best_var;
    }
    if (better) {
      best_var = var;
      result.best_bin = t;
      found = true;
    }
  }

  if (!found) {
    const auto occupied = std::find_if(hist.bins.begin(), hist.bins.end(),
                                       [](std::uint64_t c) { return c > 0; });
    result.best_bin = static_cast<int>(occupied - hist.bins.begin());
  }
  result.threshold = static_cast<double>(result.best_bin + 1) / levels;
  return result;
}

}  // namespace oasic
