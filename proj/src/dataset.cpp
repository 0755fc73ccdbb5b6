#include "oasic/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>

#include "oasic/error.hpp"
#include "oasic/rng.hpp"

namespace oasic {

namespace {

Rgb hsv_to_rgb(double hue_deg, double s, double v) {
  const double c = v * s;
  const double h = std::fmod(hue_deg, 360.0) / 60.0;
  const double x = c * (1.0 - std::abs(std::fmod(h, 2.0) - 1.0));
  double r = 0, g = 0, b = 0;
  switch (static_cast<int>(h)) {
    case 0: r = c; g = x; break;
    case 1: r = x; g = c; break;
    case 2: g = c; b = x; break;
    case 3: g = x; b = c; break;
    case 4: r = x; b = c; break;
    default: r = c; b = x; break;
  }
  const double m = v - c;
  auto u8 = [](double f) { return static_cast<std::uint8_t>(std::lround(std::clamp(f, 0.0, 1.0) * 255.0)); };
  return {u8(r + m), u8(g + m), u8(b + m)};
}

std::string index_name(int c, int i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "c%d_%03d", c, i);
  return buf;
}

}  // namespace

ToyDataset gen_toy_dataset(const ToyParams& params) {
  if (params.classes < 2 || params.per_class < 4 || params.size < 1) {
    fail(ErrorKind::kInvalidArgument, "gen_toy_dataset: need classes >= 2, per_class >= 4, size >= 1");
  }
  const int train_count = params.per_class * 3 / 4;
  const int n = params.size;
  ToyDataset out;
  for (int c = 0; c < params.classes; ++c) {
    const double hue = 360.0 * c / params.classes;
    const double cycles = c + 2;
    for (int i = 0; i < params.per_class; ++i) {
      Rng rng(derive_seed(derive_seed(params.seed, "toy"),
                          static_cast<std::uint64_t>(c) * 1000003u + static_cast<std::uint64_t>(i)));
      const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
      Image img(n, n);
      // Stripes are vertical, so one row of colors serves every row.
      std::vector<Rgb> column(static_cast<std::size_t>(n));
      for (int x = 0; x < n; ++x) {
        const double s = 0.5 + 0.5 * std::sin(2.0 * std::numbers::pi * cycles * (x + 0.5) / n + phase);
        column[x] = hsv_to_rgb(hue, params.saturation,
                               params.value_lo + (params.value_hi - params.value_lo) * s);
      }
      const auto span = static_cast<std::uint64_t>(2 * params.noise + 1);
      for (int y = 0; y < n; ++y) {
        for (int x = 0; x < n; ++x) {
          const Rgb base = column[x];
          auto jitter = [&](std::uint8_t v) {
            const long d = static_cast<long>(rng.below(span)) - params.noise;
            return static_cast<std::uint8_t>(std::clamp<long>(v + d, 0, 255));
          };
          img.at(x, y) = {jitter(base.r), jitter(base.g), jitter(base.b)};
        }
      }
      LabeledImage item{index_name(c, i), "class_" + std::to_string(c), std::move(img)};
      (i < train_count ? out.train : out.test).push_back(std::move(item));
    }
  }
  return out;
}

LabeledSet read_labeled_dir(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) fail(ErrorKind::kIo, "dataset directory not found: " + dir.string());
  std::vector<fs::path> class_dirs;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_directory() && e.path().filename() != "masks") class_dirs.push_back(e.path());
  }
  std::sort(class_dirs.begin(), class_dirs.end());
  LabeledSet out;
  for (const auto& cd : class_dirs) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(cd)) {
      if (e.is_regular_file() && e.path().extension() == ".png") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      out.push_back({f.stem().string(), cd.filename().string(), read_image(f)});
    }
  }
  if (out.empty()) fail(ErrorKind::kIo, "no labeled images under " + dir.string());
  return out;
}

void write_labeled_dir(const LabeledSet& set, const std::filesystem::path& dir) {
  for (const auto& item : set) {
    std::filesystem::create_directories(dir / item.label);
    write_image(item.image, dir / item.label / (item.name + ".png"));
  }
}

void write_occluded_dir(std::span<const OccludedSample> samples, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::ofstream manifest(dir / "manifest.csv");
  if (!manifest) fail(ErrorKind::kIo, "cannot write manifest in " + dir.string());
  manifest << "name,label,coverage,seed\n";
  for (const auto& s : samples) {
    std::filesystem::create_directories(dir / s.label);
    std::filesystem::create_directories(dir / "masks" / s.label);
    write_image(s.image, dir / s.label / (s.name + ".png"));
    write_mask(s.mask, dir / "masks" / s.label / (s.name + ".png"));
    char cov[32];
    std::snprintf(cov, sizeof cov, "%.6f", s.coverage);
    manifest << s.name << ',' << s.label << ',' << cov << ',' << s.seed << '\n';
  }
}

}  // namespace oasic
