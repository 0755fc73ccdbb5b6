#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "oasic/imaging.hpp"
#include "oasic/occlusion_synth.hpp"
#include "oasic/patch_features.hpp"

namespace oasic {

/// Reference patch vectors of one clean image per class, plus the two-point
/// calibration (a_lo, a_hi) that maps raw 1-NN cosine distance to [0, 1].
struct MemoryBank {
  ExtractorDescriptor extractor;
  std::vector<std::string> labels;          // label table
  std::vector<std::uint32_t> entry_labels;  // per entry, index into labels
  std::vector<float> entries;               // entry_count x dim, row-major
  float a_lo = std::numeric_limits<float>::quiet_NaN();
  float a_hi = std::numeric_limits<float>::quiet_NaN();

  int dim() const { return extractor.dim; }
  std::size_t size() const { return entry_labels.size(); }
  bool calibrated() const { return a_lo == a_lo && a_hi == a_hi; }

  std::span<const float> entry(std::size_t i) const {
    return {entries.data() + i * static_cast<std::size_t>(dim()), static_cast<std::size_t>(dim())};
  }

  /// Appends every cell of `grid` under `label`.
  void add(const PatchEmbeddingGrid& grid, const std::string& label);
};

/// Mean of the grid's patch vectors, re-normalized (zero stays zero).
std::vector<float> pooled_embedding(const PatchEmbeddingGrid& grid);

/// Index of the embedding with maximal cosine similarity to the re-normalized
/// mean of all embeddings; lowest index wins ties.
std::size_t select_reference(std::span<const std::vector<float>> pooled);

/// One reference image per class (the one nearest its class centroid); all
/// of its patches enter the bank. Labels are ordered lexicographically.
MemoryBank build_bank(const LabeledSet& clean, const FeatureExtractor& extractor);

/// Per patch: 1 - max over entries of cos(v, m), in [0, 2].
std::vector<float> raw_score(const MemoryBank& bank, const PatchEmbeddingGrid& grid);

struct Calibration {
  float a_lo = 0.0f;
  float a_hi = 0.0f;
};

/// Linear-interpolated percentile, q in [0, 1].
double percentile(std::vector<float> values, double q);

/// a_lo = median of clean distances, a_hi = 95th percentile of occluded
/// distances. Throws kDegenerate unless a_hi > a_lo.
Calibration calibration_from_distances(std::vector<float> clean, std::vector<float> occluded);

/// Raw distances of patches whose center pixel lies inside the sample's mask.
std::vector<float> occluded_patch_distances(const MemoryBank& bank, const PatchEmbeddingGrid& grid,
                                            const OcclusionMask& mask);

/// Calibrates against clean images and gray-occluded samples (coverage 0.5).
MemoryBank calibrate(MemoryBank bank, std::span<const LabeledImage> clean,
                     std::span<const OccludedSample> occluded, const FeatureExtractor& extractor);

/// Convenience form: occludes each clean image with gray fill at coverage
/// 0.5 (seeds derived from `seed`) and calibrates against both sets.
MemoryBank calibrate(MemoryBank bank, std::span<const LabeledImage> clean,
                     const FeatureExtractor& extractor, const PerlinParams& perlin,
                     std::uint64_t seed);

/// Patch scores clamp((d - a_lo) / (a_hi - a_lo), 0, 1).
std::vector<float> patch_scores(const MemoryBank& bank, const PatchEmbeddingGrid& grid);

/// Bilinear upsampling of a patch-score grid to a width x height map, sample
/// points at patch centers, clamped at the borders.
AnomalyMap upsample_bilinear(std::span<const float> scores, int grid_h, int grid_w, int patch_size,
                             int width, int height);

AnomalyMap score_image(const MemoryBank& bank, const Image& image,
                       const FeatureExtractor& extractor, const std::string& stem = {});

// ".bank": "OBNK", u32 version = 1, dim, patch_size, entry count (u32),
// a_lo, a_hi (f32, NaN if uncalibrated), label table (u32 count, then
// u32-length-prefixed UTF-8 labels), per-entry u32 label indices, then the
// entries as float32. All little-endian. The extractor name is not stored.
MemoryBank read_bank(const std::filesystem::path& path);
void write_bank(const MemoryBank& bank, const std::filesystem::path& path);

}  // namespace oasic
