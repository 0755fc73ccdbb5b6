#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace oasic {

struct Rgb {
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;

  friend bool operator==(const Rgb&, const Rgb&) = default;
};

/// 8-bit RGB raster, row-major.
class Image {
 public:
  Image() = default;
  Image(int width, int height, Rgb fill = {});
  Image(int width, int height, std::vector<Rgb> pixels);

  int width() const { return width_; }
  int height() const { return height_; }
  bool empty() const { return pixels_.empty(); }

  const Rgb& at(int x, int y) const { return pixels_[index(x, y)]; }
  Rgb& at(int x, int y) { return pixels_[index(x, y)]; }

  std::span<const Rgb> pixels() const { return pixels_; }
  std::span<Rgb> pixels() { return pixels_; }

  friend bool operator==(const Image&, const Image&) = default;

 private:
  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(x);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<Rgb> pixels_;
};

/// Binary per-pixel occlusion map; 1 marks an occluded pixel.
class OcclusionMask {
 public:
  OcclusionMask() = default;
  OcclusionMask(int width, int height, bool fill = false);
  OcclusionMask(int width, int height, std::vector<std::uint8_t> bits);

  int width() const { return width_; }
  int height() const { return height_; }

  bool at(int x, int y) const { return bits_[index(x, y)] != 0; }
  void set(int x, int y, bool v) { bits_[index(x, y)] = v ? 1 : 0; }

  std::span<const std::uint8_t> bits() const { return bits_; }
  std::size_t count() const;
  double coverage() const;

  friend bool operator==(const OcclusionMask&, const OcclusionMask&) = default;

 private:
  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(x);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> bits_;
};

/// Per-pixel occlusion likelihood, every value in [0, 1].
class AnomalyMap {
 public:
  AnomalyMap() = default;
  AnomalyMap(int width, int height, float fill = 0.0f);
  /// Throws kInvalidArgument if any value lies outside [0, 1].
  AnomalyMap(int width, int height, std::vector<float> values);

  /// The mask's bits cast to 0.0 / 1.0.
  static AnomalyMap from_mask(const OcclusionMask& mask);

  int width() const { return width_; }
  int height() const { return height_; }

  float at(int x, int y) const { return values_[index(x, y)]; }

  std::span<const float> values() const { return values_; }

  friend bool operator==(const AnomalyMap&, const AnomalyMap&) = default;

 private:
  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(x);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<float> values_;
};

// PNG IO. Grayscale files are promoted to RGB on load; 16-bit and
// palette images are rejected.
Image read_image(const std::filesystem::path& path);
void write_image(const Image& image, const std::filesystem::path& path);

// Masks are stored as 8-bit grayscale PNG: 1 -> 255, 0 -> 0.
// Decoding marks any pixel >= 128 as occluded.
OcclusionMask read_mask(const std::filesystem::path& path);
void write_mask(const OcclusionMask& mask, const std::filesystem::path& path);

// ".amap": "AMAP", u32 version = 1, u32 height, u32 width, then
// width*height float32, all little-endian.
AnomalyMap read_amap(const std::filesystem::path& path);
void write_amap(const AnomalyMap& map, const std::filesystem::path& path);

}  // namespace oasic
