#pragma once

#include <cstdint>
#include <filesystem>
#include <span>

#include "oasic/occlusion_synth.hpp"

namespace oasic {

/// Procedural fine-grained toy benchmark: class c is a stripe pattern with
/// hue 360 * c / C degrees and c + 2 stripe cycles across the image, with a
/// random phase per image and uniform pixel noise in [-noise, noise].
struct ToyParams {
  int classes = 8;
  int per_class = 40;
  int size = 128;
  std::uint64_t seed = 0;
  double saturation = 0.45;
  double value_lo = 0.35;  // HSV value at stripe troughs
  double value_hi = 0.85;  // ... and crests
  int noise = 8;
};

struct ToyDataset {
  LabeledSet train;  // first 3/4 of each class by index
  LabeledSet test;
};

ToyDataset gen_toy_dataset(const ToyParams& params);

/// Reads `<dir>/<label>/<name>.png`, sorted by label then name.
LabeledSet read_labeled_dir(const std::filesystem::path& dir);

/// Writes `<dir>/<label>/<name>.png`.
void write_labeled_dir(const LabeledSet& set, const std::filesystem::path& dir);

/// Writes occluded images as `<dir>/<label>/<name>.png`, ground-truth masks
/// as `<dir>/masks/<label>/<name>.png`, and `<dir>/manifest.csv` with header
/// `name,label,coverage,seed`.
void write_occluded_dir(std::span<const OccludedSample> samples, const std::filesystem::path& dir);

}  // namespace oasic
