#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "oasic/imaging.hpp"

namespace oasic {

/// grid_h x grid_w patch vectors of length dim, row-major. Each vector is
/// unit L2 norm, or exactly zero when its raw features were zero.
struct PatchEmbeddingGrid {
  int grid_h = 0;
  int grid_w = 0;
  int dim = 0;
  int patch_size = 0;
  std::vector<float> data;

  std::size_t cells() const { return static_cast<std::size_t>(grid_h) * grid_w; }

  std::span<const float> cell(std::size_t i) const {
    return {data.data() + i * static_cast<std::size_t>(dim), static_cast<std::size_t>(dim)};
  }
  std::span<float> cell(std::size_t i) {
    return {data.data() + i * static_cast<std::size_t>(dim), static_cast<std::size_t>(dim)};
  }
  std::span<const float> cell(int row, int col) const {
    return cell(static_cast<std::size_t>(row) * grid_w + col);
  }

  friend bool operator==(const PatchEmbeddingGrid&, const PatchEmbeddingGrid&) = default;
};

struct ExtractorDescriptor {
  std::string name;
  int dim = 0;
  int patch_size = 0;

  friend bool operator==(const ExtractorDescriptor&, const ExtractorDescriptor&) = default;
};

/// Deterministic image -> patch grid mapping.
class FeatureExtractor {
 public:
  virtual ~FeatureExtractor() = default;

  virtual ExtractorDescriptor descriptor() const = 0;

  /// `stem` identifies the image for extractors backed by precomputed files.
  virtual PatchEmbeddingGrid extract(const Image& image, const std::string& stem) const = 0;

  PatchEmbeddingGrid extract(const Image& image) const { return extract(image, {}); }
};

inline constexpr int kHandcraftedDim = 14;
inline constexpr int kOrientationBins = 8;

/// Per patch: mean RGB in [0,1] (3), per-channel std (3), and an 8-bin
/// magnitude-weighted histogram of luminance gradient orientation over
/// [0, pi) (8), L2-normalized. Trailing partial patches are dropped.
PatchEmbeddingGrid extract_handcrafted(const Image& image, int patch_size = 16);

class HandcraftedExtractor final : public FeatureExtractor {
 public:
  explicit HandcraftedExtractor(int patch_size = 16);

  ExtractorDescriptor descriptor() const override;
  PatchEmbeddingGrid extract(const Image& image, const std::string& stem) const override;
  using FeatureExtractor::extract;

 private:
  int patch_size_;
};

/// Serves `<dir>/<stem>.oemb` for each image. The descriptor is taken from
/// the first file found in `dir`.
class OembDirectoryExtractor final : public FeatureExtractor {
 public:
  explicit OembDirectoryExtractor(std::filesystem::path dir);

  ExtractorDescriptor descriptor() const override;
  PatchEmbeddingGrid extract(const Image& image, const std::string& stem) const override;
  using FeatureExtractor::extract;

 private:
  std::filesystem::path dir_;
  ExtractorDescriptor descriptor_;
};

/// Parses `handcrafted` or `oemb:<dir>`.
std::unique_ptr<FeatureExtractor> make_extractor(const std::string& spec);

/// Throws kFormat if any vector is neither unit norm (within `tolerance`)
/// nor exactly zero.
void validate_unit_norms(const PatchEmbeddingGrid& grid, double tolerance = 1e-4);

// ".oemb": "OEMB", u32 version = 1, grid_h, grid_w, dim, patch_size (u32),
// then grid_h*grid_w*dim float32, little-endian.
PatchEmbeddingGrid read_oemb(const std::filesystem::path& path);
void write_oemb(const PatchEmbeddingGrid& grid, const std::filesystem::path& path);

/// Normalizes `v` in place to unit L2 norm; zero vectors stay zero.
void l2_normalize(std::span<float> v);

}  // namespace oasic
