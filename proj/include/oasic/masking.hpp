#pragma once

#include <cstdint>

#include "oasic/imaging.hpp"

namespace oasic {

inline constexpr std::uint8_t kMaskGray = 127;

/// Occluded pixels become (g, g, g); all others are copied unchanged.
Image gray_mask(const Image& image, const OcclusionMask& mask, std::uint8_t g = kMaskGray);

/// Estimated occluded fraction, in [0, 1].
struct Severity {
  double value = 0.0;
};

/// Mean of the continuous anomaly map.
Severity estimate_severity(const AnomalyMap& map);

}  // namespace oasic
