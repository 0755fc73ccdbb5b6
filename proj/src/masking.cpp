#include "oasic/masking.hpp"

#include <algorithm>

#include "oasic/error.hpp"

namespace oasic {

Image gray_mask(const Image& image, const OcclusionMask& mask, std::uint8_t g) {
  require(mask.width() == image.width() && mask.height() == image.height(),
          "gray_mask: mask/image dimension mismatch");
  Image out = image;
  const auto bits = mask.bits();
  auto pixels = out.pixels();
  for (std::size_t i = 0; i < pixels.size(); ++i) {
    if (bits[i]) pixels[i] = {g, g, g};
  }
  return out;
}

Severity estimate_severity(const AnomalyMap& map) {
  const auto values = map.values();
  require(!values.empty(), "estimate_severity: empty map");
  double sum = 0.0;
  for (float v : values) sum += v;
  return {std::clamp(sum / static_cast<double>(values.size()), 0.0, 1.0)};
}

}  // namespace oasic
