#include "oasic/occlusion_synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

#include "oasic/error.hpp"
#include "oasic/rng.hpp"

namespace oasic {

namespace {

// Improved-Perlin lattice noise over a seeded permutation.
class GradientNoise {
 public:
  explicit GradientNoise(std::uint64_t seed) {
    std::array<int, 256> p{};
    std::iota(p.begin(), p.end(), 0);
    Rng rng(seed);
    for (int i = 255; i > 0; --i) {
      const auto j = static_cast<int>(rng.below(static_cast<std::uint64_t>(i) + 1));
      std::swap(p[i], p[j]);
    }
    for (int i = 0; i < 512; ++i) perm_[i] = p[i & 255];
  }

  double operator()(double x, double y) const {
    const double fx = std::floor(x);
    const double fy = std::floor(y);
    const int xi = static_cast<int>(static_cast<long long>(fx) & 255);
    const int yi = static_cast<int>(static_cast<long long>(fy) & 255);
    const double dx = x - fx;
    const double dy = y - fy;
    const double u = fade(dx);
    const double v = fade(dy);

    const int aa = perm_[perm_[xi] + yi];
    const int ab = perm_[perm_[xi] + yi + 1];
    const int ba = perm_[perm_[xi + 1] + yi];
    const int bb = perm_[perm_[xi + 1] + yi + 1];

    const double x0 = lerp(grad(aa, dx, dy), grad(ba, dx - 1, dy), u);
    const double x1 = lerp(grad(ab, dx, dy - 1), grad(bb, dx - 1, dy - 1), u);
    return lerp(x0, x1, v);
  }

 private:
  static double fade(double t) { return t * t * t * (t * (t * 6 - 15) + 10); }
  static double lerp(double a, double b, double t) { return a + t * (b - a); }

  static double grad(int hash, double x, double y) {
    switch (hash & 7) {
      case 0: return x + y;
      case 1: return -x + y;
      case 2: return x - y;
      case 3: return -x - y;
      case 4: return x;
      case 5: return -x;
      case 6: return y;
      default: return -y;
    }
  }

  std::array<int, 512> perm_{};
};

std::uint8_t to_u8(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

}  // namespace

ScalarField perlin_field(int width, int height, const PerlinParams& params) {
  require(width >= 1 && height >= 1, "perlin_field: zero dimension");
  require(params.octaves >= 1, "perlin_field: octaves must be >= 1");
  require(params.persistence > 0.0 && params.persistence <= 1.0,
          "perlin_field: persistence must be in (0, 1]");
  require(params.base_frequency > 0.0, "perlin_field: base_frequency must be > 0");

  const GradientNoise noise(params.seed);
  // Random per-octave origin so lattice zeros of different octaves do not align.
  Rng rng(derive_seed(params.seed, "perlin-offsets"));
  std::vector<std::array<double, 2>> offsets(static_cast<std::size_t>(params.octaves));
  for (auto& o : offsets) o = {rng.uniform(0.0, 256.0), rng.uniform(0.0, 256.0)};

  ScalarField field{width, height,
                    std::vector<double>(static_cast<std::size_t>(width) * height, 0.0)};
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      double sum = 0.0;
      double amplitude = 1.0;
      double frequency = params.base_frequency;
      for (int k = 0; k < params.octaves; ++k) {
        const double u = (x + 0.5) / width * frequency + offsets[k][0];
        const double v = (y + 0.5) / height * frequency + offsets[k][1];
        sum += amplitude * noise(u, v);
        amplitude *= params.persistence;
        frequency *= 2.0;
      }
      field.values[static_cast<std::size_t>(y) * width + x] = sum;
    }
  }

  const auto [lo, hi] = std::minmax_element(field.values.begin(), field.values.end());
  const double min = *lo;
  const double span = *hi - *lo;
  for (double& v : field.values) v = span > 0.0 ? (v - min) / span : 0.0;
  return field;
}

OcclusionMask mask_from_field(const ScalarField& field, double coverage) {
  require(coverage >= 0.0 && coverage <= 1.0, "mask_from_field: coverage outside [0,1]");
  require(field.width >= 1 && field.height >= 1, "mask_from_field: empty field");
  const std::size_t n = field.values.size();
  // The epsilon keeps products like 0.29 * 100 from flooring one short.
  const auto target = std::min(
      n, static_cast<std::size_t>(std::floor(coverage * static_cast<double>(n) + 1e-9)));

  std::vector<std::uint8_t> bits(n, 0);
  if (target > 0) {
    std::vector<double> sorted = field.values;
    const auto kth = sorted.begin() + static_cast<std::ptrdiff_t>(target - 1);
    std::nth_element(sorted.begin(), kth, sorted.end(), std::greater<>());
    const double quantile = *kth;

    std::size_t marked = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (field.values[i] > quantile) {
        bits[i] = 1;
        ++marked;
      }
    }
    for (std::size_t i = 0; i < n && marked < target; ++i) {
      if (field.values[i] == quantile) {
        bits[i] = 1;
        ++marked;
      }
    }
  }
  return OcclusionMask(field.width, field.height, std::move(bits));
}

Image apply_occlusion(const Image& image, const OcclusionMask& mask, const FillSpec& fill) {
  require(mask.width() == image.width() && mask.height() == image.height(),
          "apply_occlusion: mask/image dimension mismatch");
  Image out = image;

  if (const auto* gray = std::get_if<GrayFill>(&fill)) {
    const Rgb g{gray->g, gray->g, gray->g};
    for (int y = 0; y < image.height(); ++y) {
      for (int x = 0; x < image.width(); ++x) {
        if (mask.at(x, y)) out.at(x, y) = g;
      }
    }
    return out;
  }

  const auto& tex = std::get<TextureFill>(fill);
  require(!tex.source.empty(), "apply_occlusion: empty texture source");
  Rng rng(tex.offset_seed);
  const auto dx = static_cast<int>(rng.below(static_cast<std::uint64_t>(tex.source.width())));
  const auto dy = static_cast<int>(rng.below(static_cast<std::uint64_t>(tex.source.height())));
  for (int y = 0; y < image.height(); ++y) {
    for (int x = 0; x < image.width(); ++x) {
      if (mask.at(x, y)) {
        out.at(x, y) = tex.source.at((x + dx) % tex.source.width(), (y + dy) % tex.source.height());
      }
    }
  }
  return out;
}

OccludedSample occlude_image(const LabeledImage& item, double coverage,
                             const PerlinParams& perlin, const FillSpec& fill,
                             std::uint64_t seed) {
  PerlinParams params = perlin;
  params.seed = derive_seed(perlin.seed ^ seed, "perlin");
  const ScalarField field = perlin_field(item.image.width(), item.image.height(), params);
  OcclusionMask mask = mask_from_field(field, coverage);

  FillSpec resolved = fill;
  if (auto* tex = std::get_if<TextureFill>(&resolved)) {
    tex->offset_seed = derive_seed(tex->offset_seed ^ seed, "fill-offset");
  }

  OccludedSample out;
  out.name = item.name;
  out.label = item.label;
  out.image = apply_occlusion(item.image, mask, resolved);
  out.coverage = mask.coverage();
  out.mask = std::move(mask);
  out.seed = seed;
  return out;
}

std::vector<OccludedSample> synth_dataset(const LabeledSet& items, double p_max,
                                          const PerlinParams& perlin, const FillSpec& fill,
                                          std::uint64_t seed) {
  require(!items.empty(), "synth_dataset: empty input set");
  require(p_max >= 0.0 && p_max <= 1.0, "synth_dataset: p_max outside [0,1]");
  std::vector<OccludedSample> out;
  out.reserve(items.size());
  for (std::size_t i = 0; i < items.size(); ++i) {
    const std::uint64_t item_seed = derive_seed(seed, static_cast<std::uint64_t>(i));
    Rng rng(item_seed);
    const double coverage = rng.uniform() * p_max;
    out.push_back(occlude_image(items[i], coverage, perlin, fill, item_seed));
  }
  return out;
}

Image leaf_texture(int width, int height, std::uint64_t seed) {
  // Overlapping leaf blobs in mixed greens and browns with dark gaps and vein noise.
  const ScalarField blobs = perlin_field(width, height, {derive_seed(seed, "blobs"), 3, 0.5, 12.0});
  const ScalarField tone = perlin_field(width, height, {derive_seed(seed, "tone"), 2, 0.5, 5.0});
  const ScalarField veins = perlin_field(width, height, {derive_seed(seed, "veins"), 2, 0.6, 48.0});
  constexpr std::array<std::array<double, 3>, 4> palette{{
      {34, 90, 28}, {78, 140, 46}, {140, 160, 60}, {96, 64, 30}}};

  Image out(width, height);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const double b = blobs.at(x, y);
      if (b < 0.35) {
        out.at(x, y) = {to_u8(18 + 30 * b), to_u8(30 + 40 * b), to_u8(12 + 20 * b)};
        continue;
      }
      const double t = tone.at(x, y) * 3.0;
      const auto lo = static_cast<std::size_t>(std::min(2.0, std::floor(t)));
      const double f = t - static_cast<double>(lo);
      const double shade = 0.7 + 0.6 * veins.at(x, y);
      std::array<double, 3> c{};
      for (int ch = 0; ch < 3; ++ch) {
        c[ch] = ((1 - f) * palette[lo][ch] + f * palette[lo + 1][ch]) * shade;
      }
      out.at(x, y) = {to_u8(c[0]), to_u8(c[1]), to_u8(c[2])};
    }
  }
  return out;
}

Image smoke_texture(int width, int height, std::uint64_t seed) {
  // Soft, bright, slightly bluish billows.
  const ScalarField body = perlin_field(width, height, {derive_seed(seed, "body"), 5, 0.55, 3.0});
  const ScalarField wisps = perlin_field(width, height, {derive_seed(seed, "wisps"), 3, 0.5, 20.0});
  Image out(width, height);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const double v = 150.0 + 90.0 * body.at(x, y) + 25.0 * (wisps.at(x, y) - 0.5);
      out.at(x, y) = {to_u8(v - 6), to_u8(v - 2), to_u8(v + 6)};
    }
  }
  return out;
}

}  // namespace oasic
