#include "oasic/anomaly_bank.hpp"

#include <algorithm>
#include <cmath>

#include <gtest/gtest.h>

#include "oasic/dataset.hpp"
#include "oasic/masking.hpp"
#include "test_util.hpp"

namespace oasic {
namespace {

using testing::kind_of;
using testing::TempDir;

std::vector<double> unit(std::vector<double> v) {
  double n = 0;
  for (double x : v) n += x * x;
  n = std::sqrt(n);
  if (n > 0)
    for (double& x : v) x /= n;
  return v;
}

double cosine(std::span<const float> a, std::span<const float> b) {
  double ab = 0, aa = 0, bb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += static_cast<double>(a[i]) * b[i];
    aa += static_cast<double>(a[i]) * a[i];
    bb += static_cast<double>(b[i]) * b[i];
  }
  return ab / std::sqrt(aa * bb);
}

PatchEmbeddingGrid random_grid(int gh, int gw, int dim, std::uint64_t seed) {
  Rng rng(seed);
  PatchEmbeddingGrid g{gh, gw, dim, 16, std::vector<float>(static_cast<std::size_t>(gh) * gw * dim)};
  for (float& x : g.data) x = static_cast<float>(rng.uniform(-1, 1));
  for (std::size_t i = 0; i < g.cells(); ++i) l2_normalize(g.cell(i));
  return g;
}

MemoryBank bank_from(const PatchEmbeddingGrid& g, const std::string& label = "a") {
  MemoryBank bank;
  bank.extractor = {"test", g.dim, g.patch_size};
  bank.add(g, label);
  return bank;
}

ToyDataset small_toy(int classes, int per_class) {
  ToyParams p;
  p.classes = classes;
  p.per_class = per_class;
  p.size = 64;
  p.seed = 77;
  return gen_toy_dataset(p);
}

TEST(SelectReferenceTest, SingleAndIdentical) {
  std::vector<std::vector<float>> one = {{0.6f, 0.8f}};
  EXPECT_EQ(select_reference(one), 0u);
  std::vector<std::vector<float>> same(3, std::vector<float>{0.0f, 1.0f});
  EXPECT_EQ(select_reference(same), 0u);
}

TEST(BuildBankTest, MatchesExhaustiveCentroidOracle) {
  const ToyDataset toy = small_toy(2, 5);
  LabeledSet all = toy.train;
  all.insert(all.end(), toy.test.begin(), toy.test.end());
  HandcraftedExtractor ex;
  const MemoryBank bank = build_bank(all, ex);

  const auto cells = ex.extract(all[0].image).cells();
  ASSERT_EQ(bank.size(), 2 * cells);
  ASSERT_EQ(bank.labels.size(), 2u);

  for (std::uint32_t li = 0; li < bank.labels.size(); ++li) {
    std::vector<PatchEmbeddingGrid> grids;
    std::vector<std::vector<double>> pooled;
    for (const auto& item : all) {
      if (item.label != bank.labels[li]) continue;
      grids.push_back(ex.extract(item.image));
      std::vector<double> m(14, 0.0);
      for (std::size_t c = 0; c < grids.back().cells(); ++c)
        for (int d = 0; d < 14; ++d) m[d] += grids.back().cell(c)[d];
      pooled.push_back(unit(m));
    }
    ASSERT_EQ(pooled.size(), 5u);
    std::vector<double> centroid(14, 0.0);
    for (const auto& p : pooled)
      for (int d = 0; d < 14; ++d) centroid[d] += p[d];
    centroid = unit(centroid);
    std::size_t best = 0;
    double best_sim = -2;
    for (std::size_t i = 0; i < pooled.size(); ++i) {
      double s = 0;
      for (int d = 0; d < 14; ++d) s += pooled[i][d] * centroid[d];
      if (s > best_sim) {
        best_sim = s;
        best = i;
      }
    }
    // The bank's entries for this label are exactly the chosen image's grid.
    std::vector<float> got;
    for (std::size_t e = 0; e < bank.size(); ++e) {
      if (bank.entry_labels[e] != li) continue;
      const auto v = bank.entry(e);
      got.insert(got.end(), v.begin(), v.end());
    }
    EXPECT_EQ(got, grids[best].data) << bank.labels[li];
  }
}

TEST(BuildBankTest, EmptySetRejected) {
  HandcraftedExtractor ex;
  EXPECT_EQ(kind_of([&] { build_bank({}, ex); }), ErrorKind::kInvalidArgument);
}

TEST(RawScoreTest, SelfMatchIsZero) {
  const auto g = random_grid(3, 4, 14, 1);
  for (float d : raw_score(bank_from(g), g)) EXPECT_NEAR(d, 0.0f, 1e-6);
}

TEST(RawScoreTest, OrthogonalIsOne) {
  PatchEmbeddingGrid bank_grid{1, 2, 3, 16, {1, 0, 0, 0, 1, 0}};
  PatchEmbeddingGrid test_grid{1, 1, 3, 16, {0, 0, 1}};
  EXPECT_EQ(raw_score(bank_from(bank_grid), test_grid), std::vector<float>{1.0f});
}

TEST(RawScoreTest, MatchesBruteForceOracle) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto bank_grid = random_grid(5, 10, 14, seed);  // 50 entries
    const auto test_grid = random_grid(4, 4, 14, seed + 1000);
    const auto got = raw_score(bank_from(bank_grid), test_grid);
    for (std::size_t i = 0; i < test_grid.cells(); ++i) {
      double best = -2;
      for (std::size_t m = 0; m < bank_grid.cells(); ++m)
        best = std::max(best, cosine(test_grid.cell(i), bank_grid.cell(m)));
      EXPECT_NEAR(got[i], 1.0 - best, 1e-6);
    }
  }
}

TEST(RawScoreTest, MonotoneUnderBankGrowth) {
  const auto test_grid = random_grid(4, 4, 14, 5);
  MemoryBank bank = bank_from(random_grid(2, 2, 14, 6));
  auto prev = raw_score(bank, test_grid);
  for (std::uint64_t k = 0; k < 5; ++k) {
    bank.add(random_grid(2, 2, 14, 100 + k), "b");
    const auto next = raw_score(bank, test_grid);
    for (std::size_t i = 0; i < next.size(); ++i) EXPECT_LE(next[i], prev[i]);
    prev = next;
  }
}

TEST(RawScoreTest, DimMismatchRejected) {
  const MemoryBank bank = bank_from(random_grid(1, 1, 14, 1));
  EXPECT_EQ(kind_of([&] { raw_score(bank, random_grid(1, 1, 8, 2)); }), ErrorKind::kInvalidArgument);
}

TEST(CalibrationTest, ConstantPopulations) {
  const Calibration c = calibration_from_distances(std::vector<float>(10, 0.1f), std::vector<float>(7, 0.9f));
  EXPECT_EQ(c.a_lo, 0.1f);
  EXPECT_EQ(c.a_hi, 0.9f);
}

TEST(CalibrationTest, IdenticalDistributionsAreDegenerate) {
  std::vector<float> d = {0.1f, 0.2f, 0.3f};
  EXPECT_EQ(kind_of([&] { calibration_from_distances(d, {0.1f, 0.1f, 0.1f}); }), ErrorKind::kDegenerate);
  EXPECT_EQ(kind_of([&] { calibration_from_distances(std::vector<float>(5, 0.4f), std::vector<float>(5, 0.4f)); }),
            ErrorKind::kDegenerate);
}

TEST(PercentileTest, LinearInterpolation) {
  // Positions q * (n - 1) on the sorted values {1, 2, 3, 4, 5}.
  const std::vector<float> v = {5, 1, 4, 2, 3};
  EXPECT_DOUBLE_EQ(percentile(v, 0.5), 3.0);
  EXPECT_DOUBLE_EQ(percentile(v, 0.95), 4.8);
  EXPECT_DOUBLE_EQ(percentile(v, 0.0), 1.0);
  EXPECT_DOUBLE_EQ(percentile(v, 1.0), 5.0);
  EXPECT_DOUBLE_EQ(percentile({1, 2, 3, 4}, 0.5), 2.5);
}

double oracle_percentile(std::vector<float> v, double q) {
  std::sort(v.begin(), v.end());
  const double pos = q * (v.size() - 1);
  const auto i = static_cast<std::size_t>(pos);
  if (i + 1 >= v.size()) return v.back();
  return v[i] + (pos - i) * (static_cast<double>(v[i + 1]) - v[i]);
}

TEST(CalibrationTest, ToyRunMatchesPercentileOracle) {
  const ToyDataset toy = small_toy(3, 8);
  HandcraftedExtractor ex;
  const MemoryBank raw = build_bank(toy.train, ex);
  const MemoryBank cal = calibrate(raw, toy.train, ex, PerlinParams{}, 31);

  std::vector<float> clean;
  std::vector<float> occ;
  for (std::size_t i = 0; i < toy.train.size(); ++i) {
    const auto g = ex.extract(toy.train[i].image);
    const auto d = raw_score(raw, g);
    clean.insert(clean.end(), d.begin(), d.end());
    const OccludedSample s = occlude_image(toy.train[i], 0.5, PerlinParams{}, GrayFill{}, derive_seed(31, i));
    const auto gs = ex.extract(s.image);
    const auto ds = raw_score(raw, gs);
    for (int r = 0; r < gs.grid_h; ++r)
      for (int c = 0; c < gs.grid_w; ++c)
        if (s.mask.at(c * 16 + 8, r * 16 + 8)) occ.push_back(ds[r * gs.grid_w + c]);
  }
  EXPECT_EQ(cal.a_lo, static_cast<float>(oracle_percentile(clean, 0.5)));
  EXPECT_EQ(cal.a_hi, static_cast<float>(oracle_percentile(occ, 0.95)));
  EXPECT_LT(cal.a_lo, cal.a_hi);
}

TEST(ScoreImageTest, UncalibratedBankRejected) {
  HandcraftedExtractor ex;
  const Image img = testing::random_image(32, 32, 1);
  const MemoryBank bank = bank_from(ex.extract(img));
  EXPECT_EQ(kind_of([&] { score_image(bank, img, ex); }), ErrorKind::kInvalidArgument);
}

TEST(ScoreImageTest, ReferenceImageScoresZero) {
  HandcraftedExtractor ex;
  const Image img = testing::random_image(48, 32, 2);
  MemoryBank bank = bank_from(ex.extract(img));
  bank.a_lo = 0.01f;
  bank.a_hi = 0.5f;
  const AnomalyMap m = score_image(bank, img, ex);
  for (float v : m.values()) EXPECT_EQ(v, 0.0f);
}

TEST(ScoreImageTest, DistanceAtUpperAnchorGivesOnes) {
  // Bank holds e1; every test patch is a uniform color whose feature has a
  // fixed cosine to e1, so the raw distance is the same everywhere.
  HandcraftedExtractor ex;
  const Image img(32, 32, {200, 40, 40});
  const auto g = ex.extract(img);
  PatchEmbeddingGrid e1{1, 1, 14, 16, std::vector<float>(14, 0.0f)};
  e1.data[0] = 1.0f;
  MemoryBank bank = bank_from(e1);
  const float d = raw_score(bank, g)[0];
  bank.a_lo = 0.0f;
  bank.a_hi = d;
  const AnomalyMap m = score_image(bank, img, ex);
  for (float v : m.values()) EXPECT_EQ(v, 1.0f);
}

TEST(UpsampleTest, TwoPatchRowInterpolatesLinearly) {
  // Sample points sit at patch centers x = 7.5 and 23.5: pixel x maps to
  // u = clamp((x + 0.5) / 16 - 0.5, 0, 1).
  const AnomalyMap m = upsample_bilinear(std::vector<float>{0.0f, 1.0f}, 1, 2, 16, 32, 16);
  for (int y = 0; y < 16; ++y) {
    for (int x = 0; x < 32; ++x) {
      const double u = std::clamp((x + 0.5) / 16.0 - 0.5, 0.0, 1.0);
      EXPECT_NEAR(m.at(x, y), u, 1e-7) << x;
    }
  }
  EXPECT_EQ(m.at(7, 0), 0.0f);
  EXPECT_EQ(m.at(24, 0), 1.0f);
  EXPECT_FLOAT_EQ(m.at(15, 0), 0.46875f);
}

TEST(ScoreImageTest, OutputAlwaysInUnitRange) {
  const ToyDataset toy = small_toy(2, 4);
  HandcraftedExtractor ex;
  MemoryBank bank = build_bank(toy.train, ex);
  bank.a_lo = 0.0f;
  bank.a_hi = 0.05f;
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    const AnomalyMap m = score_image(bank, testing::random_image(64, 64, seed), ex);
    for (float v : m.values()) {
      EXPECT_GE(v, 0.0f);
      EXPECT_LE(v, 1.0f);
    }
  }
}

TEST(ScoreImageTest, SelfSimilarityIsMinimal) {
  const ToyDataset toy = small_toy(3, 8);
  HandcraftedExtractor ex;
  const MemoryBank base = calibrate(build_bank(toy.train, ex), toy.train, ex, PerlinParams{}, 9);
  for (std::size_t i = 0; i < toy.test.size(); i += 2) {
    MemoryBank own = base;
    own.add(ex.extract(toy.test[i].image), toy.test[i].label);
    const double self = estimate_severity(score_image(own, toy.test[i].image, ex)).value;
    EXPECT_EQ(self, 0.0);
    for (std::size_t j = 0; j < toy.test.size(); ++j) {
      if (j == i) continue;
      EXPECT_LE(self, estimate_severity(score_image(own, toy.test[j].image, ex)).value);
    }
  }
}

TEST(BankIoTest, RoundTrip) {
  TempDir dir;
  MemoryBank bank = bank_from(random_grid(2, 3, 14, 1), "alpha");
  bank.add(random_grid(2, 3, 14, 2), "beta");
  bank.a_lo = 0.125f;
  bank.a_hi = 0.75f;
  write_bank(bank, dir / "b.bank");
  const MemoryBank back = read_bank(dir / "b.bank");
  EXPECT_EQ(back.labels, bank.labels);
  EXPECT_EQ(back.entry_labels, bank.entry_labels);
  EXPECT_EQ(back.entries, bank.entries);
  EXPECT_EQ(back.a_lo, bank.a_lo);
  EXPECT_EQ(back.a_hi, bank.a_hi);
  EXPECT_EQ(back.dim(), 14);
  EXPECT_EQ(back.extractor.patch_size, 16);
}

TEST(BankIoTest, UncalibratedStaysNaN) {
  TempDir dir;
  write_bank(bank_from(random_grid(1, 1, 4, 1)), dir / "u.bank");
  EXPECT_FALSE(read_bank(dir / "u.bank").calibrated());
}

TEST(BankIoTest, TruncatedFileRejected) {
  TempDir dir;
  write_bank(bank_from(random_grid(2, 2, 6, 1)), dir / "b.bank");
  auto bytes = testing::slurp(dir / "b.bank");
  bytes.resize(bytes.size() - 4);
  testing::dump(dir / "t.bank", bytes);
  EXPECT_EQ(kind_of([&] { read_bank(dir / "t.bank"); }), ErrorKind::kFormat);
}

}  // namespace
}  // namespace oasic
