#include "oasic/anomaly_bank.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "binio.hpp"
#include "oasic/error.hpp"
#include "oasic/parallel.hpp"
#include "oasic/rng.hpp"

namespace oasic {

namespace {

double dot(std::span<const float> a, std::span<const float> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += static_cast<double>(a[i]) * b[i];
  return s;
}

void check_compatible(const MemoryBank& bank, const PatchEmbeddingGrid& grid) {
  if (grid.dim != bank.dim()) fail(ErrorKind::kInvalidArgument, "feature dim disagrees with bank dim");
}

std::vector<PatchEmbeddingGrid> extract_all(std::span<const LabeledImage> items,
                                            const FeatureExtractor& extractor) {
  std::vector<PatchEmbeddingGrid> grids(items.size());
  parallel_for(items.size(), [&](std::size_t i) {
    grids[i] = extractor.extract(items[i].image, items[i].name);
  });
  return grids;
}

}  // namespace

void MemoryBank::add(const PatchEmbeddingGrid& grid, const std::string& label) {
  require(grid.dim == dim(), "MemoryBank::add: dim mismatch");
  auto it = std::find(labels.begin(), labels.end(), label);
  if (it == labels.end()) it = labels.insert(labels.end(), label);
  const auto index = static_cast<std::uint32_t>(it - labels.begin());
  entries.insert(entries.end(), grid.data.begin(), grid.data.end());
  entry_labels.insert(entry_labels.end(), grid.cells(), index);
}

std::vector<float> pooled_embedding(const PatchEmbeddingGrid& grid) {
  require(grid.cells() > 0, "pooled_embedding: empty grid");
  std::vector<double> acc(static_cast<std::size_t>(grid.dim), 0.0);
  for (std::size_t i = 0; i < grid.cells(); ++i) {
    const auto v = grid.cell(i);
    for (int d = 0; d < grid.dim; ++d) acc[d] += v[d];
  }
  std::vector<float> out(acc.size());
  for (std::size_t d = 0; d < acc.size(); ++d) {
    out[d] = static_cast<float>(acc[d] / static_cast<double>(grid.cells()));
  }
  l2_normalize(out);
  return out;
}

std::size_t select_reference(std::span<const std::vector<float>> pooled) {
  require(!pooled.empty(), "select_reference: empty class");
  const std::size_t dim = pooled.front().size();
  std::vector<float> centroid(dim, 0.0f);
  {
    std::vector<double> acc(dim, 0.0);
    for (const auto& v : pooled) {
      require(v.size() == dim, "select_reference: inconsistent dims");
      for (std::size_t d = 0; d < dim; ++d) acc[d] += v[d];
    }
    for (std::size_t d = 0; d < dim; ++d) {
      centroid[d] = static_cast<float>(acc[d] / static_cast<double>(pooled.size()));
    }
  }
  l2_normalize(centroid);

  std::size_t best = 0;
  double best_sim = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < pooled.size(); ++i) {
    const double sim = dot(pooled[i], centroid);
    if (sim > best_sim) {
      best_sim = sim;
      best = i;
    }
  }
  return best;
}

MemoryBank build_bank(const LabeledSet& clean, const FeatureExtractor& extractor) {
  require(!clean.empty(), "build_bank: empty training set");
  std::map<std::string, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < clean.size(); ++i) by_class[clean[i].label].push_back(i);

  const std::vector<PatchEmbeddingGrid> grids = extract_all(clean, extractor);
  const ExtractorDescriptor desc = extractor.descriptor();

  MemoryBank bank;
  bank.extractor = desc;
  for (const auto& [label, members] : by_class) {
    std::vector<std::vector<float>> pooled;
    pooled.reserve(members.size());
    for (std::size_t i : members) {
      if (grids[i].dim != desc.dim) fail(ErrorKind::kInvalidArgument, "build_bank: extractor/image mismatch");
      pooled.push_back(pooled_embedding(grids[i]));
    }
    bank.add(grids[members[select_reference(pooled)]], label);
  }
  return bank;
}

std::vector<float> raw_score(const MemoryBank& bank, const PatchEmbeddingGrid& grid) {
  check_compatible(bank, grid);
  require(bank.size() > 0, "raw_score: empty bank");
  std::vector<float> out(grid.cells());
  for (std::size_t i = 0; i < grid.cells(); ++i) {
    const auto v = grid.cell(i);
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t m = 0; m < bank.size(); ++m) best = std::max(best, dot(v, bank.entry(m)));
    out[i] = static_cast<float>(std::clamp(1.0 - best, 0.0, 2.0));
  }
  return out;
}

double percentile(std::vector<float> values, double q) {
  require(!values.empty(), "percentile: empty input");
  require(q >= 0.0 && q <= 1.0, "percentile: q outside [0,1]");
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const double frac = pos - static_cast<double>(lo);
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(lo), values.end());
  const double a = values[lo];
  if (frac == 0.0 || lo + 1 >= values.size()) return a;
  const double b = *std::min_element(values.begin() + static_cast<std::ptrdiff_t>(lo) + 1, values.end());
  return a + frac * (b - a);
}

Calibration calibration_from_distances(std::vector<float> clean, std::vector<float> occluded) {
  if (clean.empty() || occluded.empty()) {
    fail(ErrorKind::kInvalidArgument, "calibrate: both calibration sets must be non-empty");
  }
  Calibration c;
  c.a_lo = static_cast<float>(percentile(std::move(clean), 0.5));
  c.a_hi = static_cast<float>(percentile(std::move(occluded), 0.95));
  if (!(c.a_hi > c.a_lo)) {
    fail(ErrorKind::kDegenerate,
         "degenerate calibration: occluded patches do not score above clean ones (a_lo=" +
             std::to_string(c.a_lo) + ", a_hi=" + std::to_string(c.a_hi) + ")");
  }
  return c;
}

std::vector<float> occluded_patch_distances(const MemoryBank& bank, const PatchEmbeddingGrid& grid,
                                            const OcclusionMask& mask) {
  const std::vector<float> raw = raw_score(bank, grid);
  std::vector<float> out;
  const int half = grid.patch_size / 2;
  for (int gy = 0; gy < grid.grid_h; ++gy) {
    for (int gx = 0; gx < grid.grid_w; ++gx) {
      const int cx = gx * grid.patch_size + half;
      const int cy = gy * grid.patch_size + half;
      if (cx < mask.width() && cy < mask.height() && mask.at(cx, cy)) {
        out.push_back(raw[static_cast<std::size_t>(gy) * grid.grid_w + gx]);
      }
    }
  }
  return out;
}

MemoryBank calibrate(MemoryBank bank, std::span<const LabeledImage> clean,
                     std::span<const OccludedSample> occluded, const FeatureExtractor& extractor) {
  if (clean.empty() || occluded.empty()) {
    fail(ErrorKind::kInvalidArgument, "calibrate: both calibration sets must be non-empty");
  }
  std::vector<std::vector<float>> clean_d(clean.size());
  parallel_for(clean.size(), [&](std::size_t i) {
    clean_d[i] = raw_score(bank, extractor.extract(clean[i].image, clean[i].name));
  });
  std::vector<std::vector<float>> occ_d(occluded.size());
  parallel_for(occluded.size(), [&](std::size_t i) {
    occ_d[i] = occluded_patch_distances(
        bank, extractor.extract(occluded[i].image, occluded[i].name), occluded[i].mask);
  });

  std::vector<float> clean_all;
  std::vector<float> occ_all;
  for (const auto& d : clean_d) clean_all.insert(clean_all.end(), d.begin(), d.end());
  for (const auto& d : occ_d) occ_all.insert(occ_all.end(), d.begin(), d.end());
  const Calibration c = calibration_from_distances(std::move(clean_all), std::move(occ_all));
  bank.a_lo = c.a_lo;
  bank.a_hi = c.a_hi;
  return bank;
}

MemoryBank calibrate(MemoryBank bank, std::span<const LabeledImage> clean,
                     const FeatureExtractor& extractor, const PerlinParams& perlin,
                     std::uint64_t seed) {
  std::vector<OccludedSample> occluded;
  occluded.reserve(clean.size());
  for (std::size_t i = 0; i < clean.size(); ++i) {
    occluded.push_back(occlude_image(clean[i], 0.5, perlin, GrayFill{}, derive_seed(seed, i)));
  }
  return calibrate(std::move(bank), clean, occluded, extractor);
}

std::vector<float> patch_scores(const MemoryBank& bank, const PatchEmbeddingGrid& grid) {
  if (!bank.calibrated()) fail(ErrorKind::kInvalidArgument, "bank is not calibrated");
  std::vector<float> d = raw_score(bank, grid);
  const double lo = bank.a_lo;
  const double span = static_cast<double>(bank.a_hi) - lo;
  for (float& v : d) v = static_cast<float>(std::clamp((v - lo) / span, 0.0, 1.0));
  return d;
}

AnomalyMap upsample_bilinear(std::span<const float> scores, int grid_h, int grid_w, int patch_size,
                             int width, int height) {
  require(grid_h >= 1 && grid_w >= 1, "upsample_bilinear: empty grid");
  require(scores.size() == static_cast<std::size_t>(grid_h) * grid_w,
          "upsample_bilinear: score count disagrees with grid");
  auto axis = [patch_size](int pixel, int cells) {
    const double u = std::clamp((pixel + 0.5) / patch_size - 0.5, 0.0, cells - 1.0);
    const int i0 = static_cast<int>(std::floor(u));
    const int i1 = std::min(i0 + 1, cells - 1);
    return std::tuple{i0, i1, u - i0};
  };

  std::vector<float> values(static_cast<std::size_t>(width) * height);
  for (int y = 0; y < height; ++y) {
    const auto [r0, r1, fy] = axis(y, grid_h);
    for (int x = 0; x < width; ++x) {
      const auto [c0, c1, fx] = axis(x, grid_w);
      auto s = [&](int r, int c) { return static_cast<double>(scores[static_cast<std::size_t>(r) * grid_w + c]); };
      const double top = s(r0, c0) + fx * (s(r0, c1) - s(r0, c0));
      const double bottom = s(r1, c0) + fx * (s(r1, c1) - s(r1, c0));
      const double v = top + fy * (bottom - top);
      values[static_cast<std::size_t>(y) * width + x] = static_cast<float>(std::clamp(v, 0.0, 1.0));
    }
  }
  return AnomalyMap(width, height, std::move(values));
}

AnomalyMap score_image(const MemoryBank& bank, const Image& image,
                       const FeatureExtractor& extractor, const std::string& stem) {
  if (!bank.calibrated()) fail(ErrorKind::kInvalidArgument, "score_image: bank is not calibrated");
  const PatchEmbeddingGrid grid = extractor.extract(image, stem);
  return upsample_bilinear(patch_scores(bank, grid), grid.grid_h, grid.grid_w, grid.patch_size,
                           image.width(), image.height());
}

MemoryBank read_bank(const std::filesystem::path& path) {
  const std::vector<std::uint8_t> bytes = detail::read_file(path);
  detail::ByteReader in(bytes, path.string());
  in.expect_magic("OBNK");
  if (in.u32() != 1) fail(ErrorKind::kFormat, path.string() + ": unsupported version");
  MemoryBank bank;
  bank.extractor.dim = static_cast<int>(in.u32());
  bank.extractor.patch_size = static_cast<int>(in.u32());
  const std::uint32_t count = in.u32();
  bank.a_lo = in.f32();
  bank.a_hi = in.f32();
  if (bank.extractor.dim <= 0) fail(ErrorKind::kFormat, path.string() + ": dim = 0");
  if (count == 0) fail(ErrorKind::kFormat, path.string() + ": empty bank");
  if (bank.calibrated() && !(bank.a_hi > bank.a_lo)) {
    fail(ErrorKind::kFormat, path.string() + ": a_hi must exceed a_lo");
  }

  const std::uint32_t label_count = in.u32();
  for (std::uint32_t i = 0; i < label_count; ++i) bank.labels.push_back(in.str());
  bank.entry_labels.resize(count);
  for (auto& l : bank.entry_labels) {
    l = in.u32();
    if (l >= label_count) fail(ErrorKind::kFormat, path.string() + ": label index out of range");
  }
  const std::size_t n = std::size_t{count} * static_cast<std::size_t>(bank.extractor.dim);
  in.expect_remaining(n * 4);
  bank.entries.resize(n);
  for (float& v : bank.entries) v = in.f32();
  return bank;
}

void write_bank(const MemoryBank& bank, const std::filesystem::path& path) {
  require(bank.size() > 0, "write_bank: empty bank");
  require(bank.entries.size() == bank.size() * static_cast<std::size_t>(bank.dim()),
          "write_bank: entry data disagrees with entry count");
  detail::ByteWriter out;
  out.magic("OBNK");
  out.u32(1);
  out.u32(static_cast<std::uint32_t>(bank.dim()));
  out.u32(static_cast<std::uint32_t>(bank.extractor.patch_size));
  out.u32(static_cast<std::uint32_t>(bank.size()));
  out.f32(bank.a_lo);
  out.f32(bank.a_hi);
  out.u32(static_cast<std::uint32_t>(bank.labels.size()));
  for (const auto& l : bank.labels) out.str(l);
  for (auto l : bank.entry_labels) out.u32(l);
  for (float v : bank.entries) out.f32(v);
  detail::write_file(path, out.bytes());
}

}  // namespace oasic
