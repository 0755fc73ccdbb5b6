#include "oasic/occlusion_synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>

#include <gtest/gtest.h>

#include "test_util.hpp"

namespace oasic {
namespace {

ScalarField random_field(int w, int h, std::uint64_t seed) {
  Rng rng(seed);
  ScalarField f{w, h, std::vector<double>(static_cast<std::size_t>(w) * h)};
  for (double& v : f.values) v = rng.uniform();
  return f;
}

int components4(const OcclusionMask& m) {
  const int w = m.width();
  const int h = m.height();
  std::vector<char> seen(static_cast<std::size_t>(w) * h, 0);
  int count = 0;
  for (int y0 = 0; y0 < h; ++y0) {
    for (int x0 = 0; x0 < w; ++x0) {
      if (!m.at(x0, y0) || seen[y0 * w + x0]) continue;
      ++count;
      std::queue<std::pair<int, int>> q;
      q.push({x0, y0});
      seen[y0 * w + x0] = 1;
      while (!q.empty()) {
        auto [x, y] = q.front();
        q.pop();
        const int nb[4][2] = {{x + 1, y}, {x - 1, y}, {x, y + 1}, {x, y - 1}};
        for (auto& n : nb) {
          if (n[0] < 0 || n[1] < 0 || n[0] >= w || n[1] >= h) continue;
          if (!m.at(n[0], n[1]) || seen[n[1] * w + n[0]]) continue;
          seen[n[1] * w + n[0]] = 1;
          q.push({n[0], n[1]});
        }
      }
    }
  }
  return count;
}

TEST(PerlinFieldTest, Deterministic) {
  const PerlinParams p{42};
  const ScalarField a = perlin_field(64, 48, p);
  const ScalarField b = perlin_field(64, 48, p);
  EXPECT_EQ(a.values, b.values);
  EXPECT_NE(a.values, perlin_field(64, 48, PerlinParams{43}).values);
}

TEST(PerlinFieldTest, NormalizedToUnitRange) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const ScalarField f = perlin_field(100, 70, PerlinParams{seed});
    const auto [lo, hi] = std::minmax_element(f.values.begin(), f.values.end());
    EXPECT_EQ(*lo, 0.0);
    EXPECT_EQ(*hi, 1.0);
  }
}

TEST(PerlinFieldTest, HorizontallySmooth) {
  const ScalarField f = perlin_field(256, 256, PerlinParams{7});
  double sum = 0.0;
  for (int y = 0; y < 256; ++y)
    for (int x = 0; x + 1 < 256; ++x) sum += std::abs(f.at(x + 1, y) - f.at(x, y));
  EXPECT_LT(sum / (256.0 * 255.0), 0.05);
}

TEST(PerlinFieldTest, ZeroDimensionRejected) {
  EXPECT_EQ(testing::kind_of([] { perlin_field(0, 5, {}); }), ErrorKind::kInvalidArgument);
}

TEST(MaskFromFieldTest, ExtremeCoverages) {
  const ScalarField f = perlin_field(40, 30, PerlinParams{1});
  EXPECT_EQ(mask_from_field(f, 0.0).count(), 0u);
  EXPECT_EQ(mask_from_field(f, 1.0).count(), 1200u);
}

TEST(MaskFromFieldTest, FortyPercentOfTenThousand) {
  EXPECT_EQ(mask_from_field(perlin_field(100, 100, PerlinParams{3}), 0.4).count(), 4000u);
}

TEST(MaskFromFieldTest, ExactCountAcrossCoverages) {
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    const ScalarField f = random_field(37, 23, seed);
    for (int k = 0; k <= 10; ++k) {
      // floor(k/10 * 851) in exact integer arithmetic.
      const std::size_t want = static_cast<std::size_t>(k * 851 / 10);
      EXPECT_EQ(mask_from_field(f, k / 10.0).count(), want) << "k=" << k;
    }
  }
}

TEST(MaskFromFieldTest, MatchesSortOracle) {
  // Oracle: stable sort of indices by value descending; ties keep row-major
  // order, so the first n entries are the occluded set.
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    ScalarField f = random_field(16, 9, seed);
    for (double& v : f.values) v = std::round(v * 6.0) / 6.0;  // force ties
    const double coverage = 0.1 + 0.08 * static_cast<double>(seed);
    const auto n = static_cast<std::size_t>(std::floor(coverage * 144 + 1e-9));
    std::vector<std::size_t> idx(144);
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t a, std::size_t b) { return f.values[a] > f.values[b]; });
    std::vector<std::uint8_t> want(144, 0);
    // Among the tied boundary value, the row-major first ones win, which the
    // stable descending sort already yields.
    for (std::size_t i = 0; i < n; ++i) want[idx[i]] = 1;
    const OcclusionMask m = mask_from_field(f, coverage);
    EXPECT_EQ(std::vector<std::uint8_t>(m.bits().begin(), m.bits().end()), want) << seed;
  }
}

TEST(MaskFromFieldTest, TiesFilledInRowMajorOrder) {
  ScalarField f{3, 2, {0.5, 0.5, 0.5, 0.5, 0.1, 0.9}};
  const OcclusionMask m = mask_from_field(f, 0.5);
  EXPECT_EQ(std::vector<std::uint8_t>(m.bits().begin(), m.bits().end()),
            (std::vector<std::uint8_t>{1, 1, 0, 0, 0, 1}));
}

TEST(MaskFromFieldTest, CoherentBlobs) {
  const OcclusionMask m = mask_from_field(perlin_field(256, 256, PerlinParams{5}), 0.5);
  EXPECT_LT(components4(m), 256 * 256 / 8);
}

TEST(ApplyOcclusionTest, EmptyMaskIsIdentity) {
  const Image img = testing::random_image(20, 10, 1);
  EXPECT_EQ(apply_occlusion(img, OcclusionMask(20, 10), GrayFill{}), img);
}

TEST(ApplyOcclusionTest, FullGrayMask) {
  const Image out = apply_occlusion(testing::random_image(9, 7, 2), OcclusionMask(9, 7, true), GrayFill{});
  for (const auto& p : out.pixels()) EXPECT_EQ(p, (Rgb{127, 127, 127}));
}

TEST(ApplyOcclusionTest, TextureHalfMaskMatchesTiling) {
  const Image img = testing::random_image(24, 16, 3);
  const Image tex = testing::random_image(10, 7, 4);
  OcclusionMask mask(24, 16);
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 12; ++x) mask.set(x, y, true);
  const std::uint64_t offset_seed = 99;
  const Image out = apply_occlusion(img, mask, TextureFill{tex, offset_seed});

  Rng rng(offset_seed);
  const int dx = static_cast<int>(rng.below(10));
  const int dy = static_cast<int>(rng.below(7));
  for (int y = 0; y < 16; ++y) {
    for (int x = 0; x < 24; ++x) {
      const Rgb want = x < 12 ? tex.at((x + dx) % 10, (y + dy) % 7) : img.at(x, y);
      ASSERT_EQ(out.at(x, y), want) << x << "," << y;
    }
  }
}

TEST(ApplyOcclusionTest, NeverTouchesVisiblePixels) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Image img = testing::random_image(17, 13, seed);
    const OcclusionMask mask = testing::random_mask(17, 13, seed + 100);
    const Image out = apply_occlusion(img, mask, TextureFill{testing::random_image(5, 5, seed), seed});
    for (int y = 0; y < 13; ++y)
      for (int x = 0; x < 17; ++x)
        if (!mask.at(x, y)) ASSERT_EQ(out.at(x, y), img.at(x, y));
  }
}

TEST(ApplyOcclusionTest, DimensionMismatch) {
  EXPECT_EQ(testing::kind_of([] { apply_occlusion(Image(4, 4), OcclusionMask(4, 5), GrayFill{}); }),
            ErrorKind::kInvalidArgument);
}

LabeledSet small_set(std::size_t n) {
  LabeledSet set;
  for (std::size_t i = 0; i < n; ++i) {
    set.push_back({"img" + std::to_string(i), "c" + std::to_string(i % 2),
                   testing::random_image(16, 16, i)});
  }
  return set;
}

TEST(SynthDatasetTest, ZeroPmaxLeavesImagesUntouched) {
  const LabeledSet set = small_set(6);
  const auto out = synth_dataset(set, 0.0, {}, GrayFill{}, 1);
  ASSERT_EQ(out.size(), set.size());
  for (std::size_t i = 0; i < set.size(); ++i) {
    EXPECT_EQ(out[i].image, set[i].image);
    EXPECT_EQ(out[i].coverage, 0.0);
    EXPECT_EQ(out[i].label, set[i].label);
  }
}

TEST(SynthDatasetTest, CoverageMeanNearHalfPmax) {
  LabeledSet set(1000, LabeledImage{"x", "c", Image(8, 8)});
  const auto out = synth_dataset(set, 0.8, {}, GrayFill{}, 2024);
  double mean = 0.0;
  for (const auto& s : out) {
    EXPECT_LE(s.coverage, 0.8);
    EXPECT_EQ(s.coverage, s.mask.coverage());
    mean += s.coverage / 1000.0;
  }
  EXPECT_GE(mean, 0.36);
  EXPECT_LE(mean, 0.44);
}

TEST(SynthDatasetTest, Deterministic) {
  const LabeledSet set = small_set(4);
  const auto a = synth_dataset(set, 0.6, {}, GrayFill{}, 5);
  const auto b = synth_dataset(set, 0.6, {}, GrayFill{}, 5);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].image, b[i].image);
    EXPECT_EQ(a[i].mask, b[i].mask);
    EXPECT_EQ(a[i].coverage, b[i].coverage);
  }
}

TEST(SynthDatasetTest, EmptyInputRejected) {
  EXPECT_EQ(testing::kind_of([] { synth_dataset({}, 0.5, {}, GrayFill{}, 1); }),
            ErrorKind::kInvalidArgument);
}

TEST(ProceduralTextureTest, DeterministicAndNonUniform) {
  EXPECT_EQ(leaf_texture(32, 32, 1), leaf_texture(32, 32, 1));
  EXPECT_EQ(smoke_texture(32, 32, 1), smoke_texture(32, 32, 1));
  const Image leaf = leaf_texture(32, 32, 1);
  EXPECT_FALSE(std::all_of(leaf.pixels().begin(), leaf.pixels().end(),
                           [&](const Rgb& p) { return p == leaf.pixels()[0]; }));
}

}  // namespace
}  // namespace oasic
