#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "oasic/imaging.hpp"

namespace oasic {

struct PerlinParams {
  std::uint64_t seed = 0;
  int octaves = 4;
  double persistence = 0.5;
  double base_frequency = 4.0;  // cycles per image edge for the first octave
};

struct GrayFill {
  std::uint8_t g = 127;
};

/// Tiles `source` over occluded pixels with an offset drawn from `offset_seed`.
struct TextureFill {
  Image source;
  std::uint64_t offset_seed = 0;
};

using FillSpec = std::variant<GrayFill, TextureFill>;

/// Dense scalar field, row-major.
struct ScalarField {
  int width = 0;
  int height = 0;
  std::vector<double> values;

  double at(int x, int y) const {
    return values[static_cast<std::size_t>(y) * static_cast<std::size_t>(width) +
                  static_cast<std::size_t>(x)];
  }
};

/// Fractal gradient noise: `octaves` layers, layer k at frequency
/// base_frequency * 2^k with amplitude persistence^k, min-max normalized
/// to [0, 1]. A constant field normalizes to all zeros.
ScalarField perlin_field(int width, int height, const PerlinParams& params);

/// Marks exactly floor(coverage * width * height) pixels: everything strictly
/// above the (1 - coverage)-quantile, then ties at the quantile in row-major
/// order.
OcclusionMask mask_from_field(const ScalarField& field, double coverage);

/// Occluded pixels take the fill; pixels outside the mask are untouched.
Image apply_occlusion(const Image& image, const OcclusionMask& mask, const FillSpec& fill);

struct LabeledImage {
  std::string name;
  std::string label;
  Image image;
};

using LabeledSet = std::vector<LabeledImage>;

struct OccludedSample {
  std::string name;
  std::string label;
  Image image;
  OcclusionMask mask;
  double coverage = 0.0;  // true occluded fraction of the mask
  std::uint64_t seed = 0;
};

/// Occludes one image at an exact coverage. The Perlin seed and the texture
/// offset seed are both derived from `seed` (mixed with `perlin.seed`).
OccludedSample occlude_image(const LabeledImage& item, double coverage,
                             const PerlinParams& perlin, const FillSpec& fill,
                             std::uint64_t seed);

/// Builds D_[0,p_max]: image i gets coverage ~ U(0, p_max) drawn from
/// derive_seed(seed, i).
std::vector<OccludedSample> synth_dataset(const LabeledSet& items, double p_max,
                                          const PerlinParams& perlin, const FillSpec& fill,
                                          std::uint64_t seed);

// Procedural stand-ins for natural occluder cutouts.
Image leaf_texture(int width, int height, std::uint64_t seed);
Image smoke_texture(int width, int height, std::uint64_t seed);

}  // namespace oasic
