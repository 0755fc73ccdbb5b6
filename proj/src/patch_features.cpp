#include "oasic/patch_features.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>

#include "binio.hpp"
#include "oasic/error.hpp"

namespace oasic {

namespace {

double luminance(const Rgb& p) {
  return (0.299 * p.r + 0.587 * p.g + 0.114 * p.b) / 255.0;
}

}  // namespace

void l2_normalize(std::span<float> v) {
  double sq = 0.0;
  for (float x : v) sq += static_cast<double>(x) * x;
  if (sq == 0.0) return;
  const double inv = 1.0 / std::sqrt(sq);
  for (float& x : v) x = static_cast<float>(x * inv);
}

PatchEmbeddingGrid extract_handcrafted(const Image& image, int patch_size) {
  require(patch_size >= 1, "extract_handcrafted: patch_size must be >= 1");
  if (image.width() < patch_size || image.height() < patch_size) {
    fail(ErrorKind::kInvalidArgument, "extract_handcrafted: image smaller than one patch");
  }
  const int w = image.width();
  const int h = image.height();

  std::vector<double> lum(static_cast<std::size_t>(w) * h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) lum[static_cast<std::size_t>(y) * w + x] = luminance(image.at(x, y));
  }
  auto L = [&](int x, int y) {
    x = std::clamp(x, 0, w - 1);
    y = std::clamp(y, 0, h - 1);
    return lum[static_cast<std::size_t>(y) * w + x];
  };

  PatchEmbeddingGrid grid;
  grid.grid_h = h / patch_size;
  grid.grid_w = w / patch_size;
  grid.dim = kHandcraftedDim;
  grid.patch_size = patch_size;
  grid.data.assign(grid.cells() * kHandcraftedDim, 0.0f);

  const double n = static_cast<double>(patch_size) * patch_size;
  const double bin_width = std::numbers::pi / kOrientationBins;

  for (int gy = 0; gy < grid.grid_h; ++gy) {
    for (int gx = 0; gx < grid.grid_w; ++gx) {
      // Integer moments keep a flat patch's std exactly 0.
      std::int64_t sum[3] = {0, 0, 0};
      std::int64_t sum_sq[3] = {0, 0, 0};
      double hist[kOrientationBins] = {};
      for (int y = gy * patch_size; y < (gy + 1) * patch_size; ++y) {
        for (int x = gx * patch_size; x < (gx + 1) * patch_size; ++x) {
          const Rgb& p = image.at(x, y);
          const std::int64_t c[3] = {p.r, p.g, p.b};
          for (int ch = 0; ch < 3; ++ch) {
            sum[ch] += c[ch];
            sum_sq[ch] += c[ch] * c[ch];
          }
          // Sobel: central differences smoothed 1-2-1 across the other axis.
          const double dx = (L(x + 1, y - 1) - L(x - 1, y - 1)) + 2.0 * (L(x + 1, y) - L(x - 1, y)) +
                            (L(x + 1, y + 1) - L(x - 1, y + 1));
          const double dy = (L(x - 1, y + 1) - L(x - 1, y - 1)) + 2.0 * (L(x, y + 1) - L(x, y - 1)) +
                            (L(x + 1, y + 1) - L(x + 1, y - 1));
          const double mag = std::hypot(dx, dy);
          if (mag == 0.0) continue;
          double theta = std::atan2(dy, dx);
          if (theta < 0.0) theta += std::numbers::pi;
          if (theta >= std::numbers::pi) theta -= std::numbers::pi;
          const int bin = std::min(kOrientationBins - 1, static_cast<int>(theta / bin_width));
          hist[bin] += mag;
        }
      }

      std::span<float> v = grid.cell(static_cast<std::size_t>(gy) * grid.grid_w + gx);
      const auto count = static_cast<std::int64_t>(patch_size) * patch_size;
      for (int ch = 0; ch < 3; ++ch) {
        const std::int64_t spread = count * sum_sq[ch] - sum[ch] * sum[ch];
        v[ch] = static_cast<float>(static_cast<double>(sum[ch]) / (n * 255.0));
        v[3 + ch] = static_cast<float>(std::sqrt(static_cast<double>(spread)) / (n * 255.0));
      }
      for (int b = 0; b < kOrientationBins; ++b) v[6 + b] = static_cast<float>(hist[b] / n);
      l2_normalize(v);
    }
  }
  return grid;
}

HandcraftedExtractor::HandcraftedExtractor(int patch_size) : patch_size_(patch_size) {
  require(patch_size >= 1, "HandcraftedExtractor: patch_size must be >= 1");
}

ExtractorDescriptor HandcraftedExtractor::descriptor() const {
  return {"handcrafted", kHandcraftedDim, patch_size_};
}

PatchEmbeddingGrid HandcraftedExtractor::extract(const Image& image, const std::string&) const {
  return extract_handcrafted(image, patch_size_);
}

OembDirectoryExtractor::OembDirectoryExtractor(std::filesystem::path dir) : dir_(std::move(dir)) {
  if (!std::filesystem::is_directory(dir_)) {
    fail(ErrorKind::kIo, "oemb directory not found: " + dir_.string());
  }
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir_)) {
    if (entry.path().extension() == ".oemb") files.push_back(entry.path());
  }
  if (files.empty()) fail(ErrorKind::kIo, "no .oemb files in " + dir_.string());
  std::sort(files.begin(), files.end());
  const PatchEmbeddingGrid first = read_oemb(files.front());
  descriptor_ = {"oemb", first.dim, first.patch_size};
}

ExtractorDescriptor OembDirectoryExtractor::descriptor() const { return descriptor_; }

PatchEmbeddingGrid OembDirectoryExtractor::extract(const Image&, const std::string& stem) const {
  require(!stem.empty(), "oemb extractor needs an image stem");
  std::filesystem::path file = dir_ / (stem + ".oemb");
  // Masked variants fall back to the unmasked embedding when not exported.
  constexpr std::string_view kMasked = ".masked";
  if (!std::filesystem::exists(file) && stem.ends_with(kMasked)) {
    file = dir_ / (stem.substr(0, stem.size() - kMasked.size()) + ".oemb");
  }
  PatchEmbeddingGrid grid = read_oemb(file);
  if (grid.dim != descriptor_.dim || grid.patch_size != descriptor_.patch_size) {
    fail(ErrorKind::kFormat, "oemb file " + stem + " disagrees with the directory's dim/patch size");
  }
  validate_unit_norms(grid);
  return grid;
}

std::unique_ptr<FeatureExtractor> make_extractor(const std::string& spec) {
  if (spec == "handcrafted") return std::make_unique<HandcraftedExtractor>();
  if (spec.starts_with("oemb:")) return std::make_unique<OembDirectoryExtractor>(spec.substr(5));
  fail(ErrorKind::kInvalidArgument, "unknown feature spec '" + spec + "'");
}

void validate_unit_norms(const PatchEmbeddingGrid& grid, double tolerance) {
  for (std::size_t i = 0; i < grid.cells(); ++i) {
    double sq = 0.0;
    for (float x : grid.cell(i)) sq += static_cast<double>(x) * x;
    if (sq == 0.0) continue;
    if (std::abs(std::sqrt(sq) - 1.0) > tolerance) {
      fail(ErrorKind::kFormat, "patch vector " + std::to_string(i) + " is not unit norm");
    }
  }
}

PatchEmbeddingGrid read_oemb(const std::filesystem::path& path) {
  const std::vector<std::uint8_t> bytes = detail::read_file(path);
  detail::ByteReader in(bytes, path.string());
  in.expect_magic("OEMB");
  if (in.u32() != 1) fail(ErrorKind::kFormat, path.string() + ": unsupported version");
  PatchEmbeddingGrid grid;
  grid.grid_h = static_cast<int>(in.u32());
  grid.grid_w = static_cast<int>(in.u32());
  grid.dim = static_cast<int>(in.u32());
  grid.patch_size = static_cast<int>(in.u32());
  if (grid.dim <= 0) fail(ErrorKind::kFormat, path.string() + ": dim = 0");
  if (grid.grid_h <= 0 || grid.grid_w <= 0) fail(ErrorKind::kFormat, path.string() + ": empty grid");
  const std::size_t n = grid.cells() * static_cast<std::size_t>(grid.dim);
  in.expect_remaining(n * 4);
  grid.data.resize(n);
  for (float& v : grid.data) v = in.f32();
  return grid;
}

void write_oemb(const PatchEmbeddingGrid& grid, const std::filesystem::path& path) {
  require(grid.dim > 0, "write_oemb: dim = 0");
  require(grid.data.size() == grid.cells() * static_cast<std::size_t>(grid.dim),
          "write_oemb: data size disagrees with header");
  detail::ByteWriter out;
  out.magic("OEMB");
  out.u32(1);
  out.u32(static_cast<std::uint32_t>(grid.grid_h));
  out.u32(static_cast<std::uint32_t>(grid.grid_w));
  out.u32(static_cast<std::uint32_t>(grid.dim));
  out.u32(static_cast<std::uint32_t>(grid.patch_size));
  for (float v : grid.data) out.f32(v);
  detail::write_file(path, out.bytes());
}

}  // namespace oasic
