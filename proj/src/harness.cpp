#include "oasic/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "oasic/anomaly_bank.hpp"
#include "oasic/error.hpp"
#include "oasic/masking.hpp"
#include "oasic/parallel.hpp"
#include "oasic/patch_features.hpp"
#include "oasic/rng.hpp"
#include "oasic/thresholding.hpp"

namespace oasic {

namespace {

constexpr int kTextureSize = 256;

std::string fmt2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string fmt_level(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

double threshold_for(const std::string& mode, const AnomalyMap& map) {
  if (mode == "otsu") return otsu_threshold(map);
  if (mode.starts_with("fixed:")) return std::stod(mode.substr(6));
  fail(ErrorKind::kInvalidArgument, "unknown threshold mode '" + mode + "'");
}

void check_config(const ExperimentConfig& c) {
  require(!c.levels.empty(), "config: empty level grid");
  require(std::is_sorted(c.levels.begin(), c.levels.end()), "config: levels must be sorted");
  for (double l : c.levels) require(l >= 0.0 && l <= 1.0, "config: level outside [0,1]");
  for (double l : c.segmentation_levels) require(l > 0.0 && l < 1.0, "config: segmentation level outside (0,1)");
  require(!c.test_occlusions.empty(), "config: no test occlusion types");
  require(!c.pool_levels.empty(), "config: empty pool level set");
  if (c.threshold != "otsu") {
    require(c.threshold.starts_with("fixed:"), "config: threshold must be otsu or fixed:<tau>");
    const double tau = std::stod(c.threshold.substr(6));
    require(tau >= 0.0 && tau <= 1.0, "config: fixed threshold outside [0,1]");
  }
}

struct PixelScores {
  std::vector<double> scores;
  std::vector<std::uint8_t> labels;
};

PixelScores pixels_of(const AnomalyMap& map, const OcclusionMask& truth) {
  PixelScores p;
  p.scores.assign(map.values().begin(), map.values().end());
  p.labels.assign(truth.bits().begin(), truth.bits().end());
  return p;
}

}  // namespace

double curve_summary(const EvalCurve& curve) {
  if (curve.levels.size() == 1) return curve.accuracies.front();
  return auc_occ(curve);
}

FillSpec occlusion_fill(const std::string& type, std::uint64_t seed) {
  if (type == "gray") return GrayFill{};
  if (type == "texture-a") return TextureFill{leaf_texture(kTextureSize, kTextureSize, derive_seed(seed, "leaf")), 0};
  if (type == "texture-b") return TextureFill{smoke_texture(kTextureSize, kTextureSize, derive_seed(seed, "smoke")), 0};
  fail(ErrorKind::kInvalidArgument, "unknown occlusion type '" + type + "'");
}

Report run_experiment(const ExperimentConfig& config) {
  check_config(config);
  const std::uint64_t master = config.seed;

  LabeledSet train;
  LabeledSet test;
  if (config.dataset_dir) {
    train = read_labeled_dir(*config.dataset_dir / "train");
    test = read_labeled_dir(*config.dataset_dir / "test");
  } else {
    ToyParams toy = config.toy;
    toy.seed = derive_seed(master, "toy");
    ToyDataset data = gen_toy_dataset(toy);
    train = std::move(data.train);
    test = std::move(data.test);
  }
  const auto extractor = make_extractor(config.features);

  MemoryBank bank = build_bank(train, *extractor);
  bank = calibrate(std::move(bank), train, *extractor, config.perlin, derive_seed(master, "calibration"));

  PoolParams pool_params;
  pool_params.levels = config.pool_levels;
  pool_params.perlin = config.perlin;
  pool_params.train = config.train;
  pool_params.seed = derive_seed(master, "pool");
  const ModelPool pool = train_pool(train, *extractor, pool_params);
  const PoolMember& widest = pool.members.back();
  const PoolMember& narrowest = pool.members.front();

  // Occlusion-trained baseline: same range as the widest pool member, but
  // textured fill from training-only texture instances.
  const std::uint64_t baseline_seed = derive_seed(master, "baseline");
  const std::vector<OccludedSample> baseline_data =
      synth_dataset(train, widest.p, config.perlin,
                    occlusion_fill(config.baseline_occlusion, derive_seed(baseline_seed, "textures")),
                    derive_seed(baseline_seed, "synth"));
  LabeledSet baseline_set;
  for (const auto& s : baseline_data) baseline_set.push_back({s.name, s.label, s.image});
  TrainParams baseline_train = config.train;
  baseline_train.seed = derive_seed(baseline_seed, "train");
  const Classifier baseline = train_classifier(baseline_set, widest.p, *extractor, baseline_train);

  const std::uint64_t test_texture_seed = derive_seed(master, "test-textures");
  std::vector<FillSpec> fills;
  for (const auto& t : config.test_occlusions) fills.push_back(occlusion_fill(t, test_texture_seed));

  Report report;
  report.seed = master;
  report.levels = config.levels;
  report.bank_a_lo = bank.a_lo;
  report.bank_a_hi = bank.a_hi;
  for (const auto& name : kConfigNames) report.curves[name].levels = config.levels;
  for (const auto& m : pool.members) report.pool_curves[fmt2(m.p)].levels = config.levels;

  // Classification: test image i carries occlusion type i mod k at exactly
  // the level's coverage; every arm sees the same occluded images.
  const std::uint64_t test_seed = derive_seed(master, "test");
  const std::size_t arms = kConfigNames.size();
  for (std::size_t li = 0; li < config.levels.size(); ++li) {
    const double level = config.levels[li];
    std::vector<std::vector<std::uint8_t>> correct(test.size(), std::vector<std::uint8_t>(arms, 0));
    std::vector<std::vector<std::uint8_t>> member_correct(test.size(),
                                                          std::vector<std::uint8_t>(pool.members.size(), 0));
    parallel_for(test.size(), [&](std::size_t i) {
      const LabeledImage& item = test[i];
      const std::uint64_t seed = derive_seed(test_seed, li * 1000003u + i);
      const OccludedSample occluded =
          occlude_image(item, level, config.perlin, fills[i % fills.size()], seed);
      const OccludedSample gray = occlude_image(item, level, config.perlin, GrayFill{}, seed);

      const AnomalyMap map = score_image(bank, occluded.image, *extractor);
      const OcclusionMask predicted = threshold_fixed(map, threshold_for(config.threshold, map));
      const Image masked = gray_mask(occluded.image, predicted);
      const double severity = estimate_severity(map).value;
      const PoolMember& chosen = select_model(pool, severity);

      const std::vector<float> masked_feature = image_feature(masked, *extractor);
      const std::vector<float> raw_feature = image_feature(occluded.image, *extractor);
      const std::string* predictions[] = {
          &chosen.model.predict(masked_feature),     // oasic
          &widest.model.predict(masked_feature),     // mask_only
          &chosen.model.predict(raw_feature),        // selection_only
          &baseline.predict(raw_feature),            // occlusion_trained
          &narrowest.model.predict(raw_feature),     // clean_trained
      };
      for (std::size_t a = 0; a < arms; ++a) correct[i][a] = *predictions[a] == item.label;

      const std::vector<float> gray_feature = image_feature(gray.image, *extractor);
      for (std::size_t m = 0; m < pool.members.size(); ++m) {
        member_correct[i][m] = pool.members[m].model.predict(gray_feature) == item.label;
      }

      if (config.dump_intermediates) {
        const auto dir = config.out_dir / "intermediates" / ("level_" + fmt2(level));
        std::filesystem::create_directories(dir);
        write_image(occluded.image, dir / (item.name + "_occluded.png"));
        write_mask(occluded.mask, dir / (item.name + "_truth.png"));
        write_amap(map, dir / (item.name + ".amap"));
        write_mask(predicted, dir / (item.name + "_mask.png"));
        write_image(masked, dir / (item.name + "_masked.png"));
      }
    });

    for (std::size_t a = 0; a < arms; ++a) {
      std::size_t hits = 0;
      for (const auto& c : correct) hits += c[a];
      report.curves[kConfigNames[a]].accuracies.push_back(static_cast<double>(hits) / test.size());
    }
    for (std::size_t m = 0; m < pool.members.size(); ++m) {
      std::size_t hits = 0;
      for (const auto& c : member_correct) hits += c[m];
      report.pool_curves[fmt2(pool.members[m].p)].accuracies.push_back(static_cast<double>(hits) / test.size());
    }
  }
  for (const auto& name : kConfigNames) report.auc_occ[name] = curve_summary(report.curves[name]);

  // Segmentation and severity tables: every test image under every type.
  const std::uint64_t seg_seed = derive_seed(master, "segmentation");
  for (std::size_t ti = 0; ti < config.test_occlusions.size(); ++ti) {
    for (std::size_t li = 0; li < config.segmentation_levels.size(); ++li) {
      const double level = config.segmentation_levels[li];
      std::vector<double> aurocs(test.size());
      std::vector<double> aps(test.size());
      std::vector<double> errors(test.size());
      std::vector<double> estimates(test.size());
      parallel_for(test.size(), [&](std::size_t i) {
        const std::uint64_t seed = derive_seed(seg_seed, (ti * 1000u + li) * 1000003u + i);
        const OccludedSample occluded = occlude_image(test[i], level, config.perlin, fills[ti], seed);
        const AnomalyMap map = score_image(bank, occluded.image, *extractor);
        const PixelScores px = pixels_of(map, occluded.mask);
        aurocs[i] = auroc(px.scores, px.labels);
        aps[i] = average_precision(px.scores, px.labels);
        estimates[i] = estimate_severity(map).value;
        errors[i] = std::abs(estimates[i] - occluded.coverage);
      });
      auto mean = [](const std::vector<double>& v) {
        double s = 0.0;
        for (double x : v) s += x;
        return s / static_cast<double>(v.size());
      };
      report.segmentation.push_back({config.test_occlusions[ti], level, mean(aurocs), mean(aps)});
      report.severity.push_back({config.test_occlusions[ti], level, mean(errors), mean(estimates)});
    }
  }
  return report;
}

std::string report_to_json(const Report& report) {
  nlohmann::ordered_json j;
  j["seed"] = report.seed;
  j["levels"] = report.levels;
  j["bank"] = {{"a_lo", report.bank_a_lo}, {"a_hi", report.bank_a_hi}};
  nlohmann::ordered_json configs = nlohmann::ordered_json::object();
  for (const auto& [name, curve] : report.curves) {
    configs[name] = {{"auc_occ", report.auc_occ.at(name)}, {"accuracy", curve.accuracies}};
  }
  j["configs"] = std::move(configs);
  nlohmann::ordered_json pool = nlohmann::ordered_json::object();
  for (const auto& [key, curve] : report.pool_curves) pool[key] = curve.accuracies;
  j["pool_accuracy_gray"] = std::move(pool);
  nlohmann::ordered_json sev = nlohmann::ordered_json::array();
  for (const auto& s : report.severity) {
    sev.push_back({{"occlusion", s.occlusion}, {"level", s.level},
                   {"mean_abs_error", s.mean_abs_error}, {"mean_estimate", s.mean_estimate}});
  }
  j["severity"] = std::move(sev);
  nlohmann::ordered_json seg = nlohmann::ordered_json::array();
  for (const auto& s : report.segmentation) {
    seg.push_back({{"occlusion", s.occlusion}, {"level", s.level}, {"mauroc", s.mauroc}, {"map", s.map}});
  }
  j["segmentation"] = std::move(seg);
  return j.dump(2) + "\n";
}

Report report_from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    Report r;
    r.seed = j.at("seed").get<std::uint64_t>();
    r.levels = j.at("levels").get<std::vector<double>>();
    r.bank_a_lo = j.at("bank").at("a_lo").get<double>();
    r.bank_a_hi = j.at("bank").at("a_hi").get<double>();
    for (const auto& [name, c] : j.at("configs").items()) {
      r.curves[name] = {r.levels, c.at("accuracy").get<std::vector<double>>()};
      r.auc_occ[name] = c.at("auc_occ").get<double>();
    }
    for (const auto& [key, acc] : j.at("pool_accuracy_gray").items()) {
      r.pool_curves[key] = {r.levels, acc.get<std::vector<double>>()};
    }
    for (const auto& s : j.at("severity")) {
      r.severity.push_back({s.at("occlusion").get<std::string>(), s.at("level").get<double>(),
                            s.at("mean_abs_error").get<double>(), s.at("mean_estimate").get<double>()});
    }
    for (const auto& s : j.at("segmentation")) {
      r.segmentation.push_back({s.at("occlusion").get<std::string>(), s.at("level").get<double>(),
                                s.at("mauroc").get<double>(), s.at("map").get<double>()});
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kFormat, std::string("report json: ") + e.what());
  }
}

void write_report(const Report& report, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto open = [&](const char* name) {
    std::ofstream out(dir / name, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::kIo, "cannot write " + (dir / name).string());
    return out;
  };
  open("report.json") << report_to_json(report);

  auto curves = open("curves.csv");
  curves << "config,level,accuracy\n";
  for (const auto& name : kConfigNames) {
    const auto it = report.curves.find(name);
    if (it == report.curves.end()) continue;
    for (std::size_t i = 0; i < it->second.levels.size(); ++i) {
      char acc[32];
      std::snprintf(acc, sizeof acc, "%.17g", it->second.accuracies[i]);
      curves << name << ',' << fmt_level(it->second.levels[i]) << ',' << acc << '\n';
    }
  }

  auto seg = open("segmentation.csv");
  seg << "occlusion,level,mauroc,map,severity_mae\n";
  for (std::size_t i = 0; i < report.segmentation.size(); ++i) {
    const auto& s = report.segmentation[i];
    char buf[128];
    std::snprintf(buf, sizeof buf, "%s,%s,%.6f,%.6f,%.6f", s.occlusion.c_str(), fmt_level(s.level).c_str(),
                  s.mauroc, s.map, report.severity[i].mean_abs_error);
    seg << buf << '\n';
  }
}

namespace {

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
  }
  return out;
}

std::vector<double> parse_levels(const std::string& value) {
  std::vector<double> out;
  for (const auto& s : split_list(value)) out.push_back(std::stod(s));
  return out;
}

}  // namespace

void apply_config_value(ExperimentConfig& c, const std::string& key, const std::string& value) {
  try {
    if (key == "classes") c.toy.classes = std::stoi(value);
    else if (key == "per-class") c.toy.per_class = std::stoi(value);
    else if (key == "image-size") c.toy.size = std::stoi(value);
    else if (key == "saturation") c.toy.saturation = std::stod(value);
    else if (key == "value-lo") c.toy.value_lo = std::stod(value);
    else if (key == "value-hi") c.toy.value_hi = std::stod(value);
    else if (key == "noise") c.toy.noise = std::stoi(value);
    else if (key == "dataset") c.dataset_dir = value;
    else if (key == "features") c.features = value;
    else if (key == "pool-levels") c.pool_levels = parse_levels(value);
    else if (key == "threshold") c.threshold = value;
    else if (key == "occlusions") c.test_occlusions = split_list(value);
    else if (key == "baseline-occlusion") c.baseline_occlusion = value;
    else if (key == "levels") c.levels = parse_levels(value);
    else if (key == "segmentation-levels") c.segmentation_levels = parse_levels(value);
    else if (key == "octaves") c.perlin.octaves = std::stoi(value);
    else if (key == "persistence") c.perlin.persistence = std::stod(value);
    else if (key == "base-frequency") c.perlin.base_frequency = std::stod(value);
    else if (key == "epochs") c.train.epochs = std::stoi(value);
    else if (key == "step") c.train.step = std::stod(value);
    else if (key == "batch") c.train.batch = std::stoi(value);
    else if (key == "seed") c.seed = std::stoull(value);
    else if (key == "out") c.out_dir = value;
    else if (key == "dump-intermediates") c.dump_intermediates = value == "1" || value == "true";
    else fail(ErrorKind::kInvalidArgument, "unknown config key '" + key + "'");
  } catch (const std::logic_error&) {
    fail(ErrorKind::kInvalidArgument, "bad value for config key '" + key + "': " + value);
  }
}

ExperimentConfig parse_config(const std::string& text, ExperimentConfig base) {
  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      fail(ErrorKind::kInvalidArgument, "config line " + std::to_string(lineno) + ": expected key = value");
    }
    auto trim = [](std::string s) {
      const auto first = s.find_first_not_of(" \t\r");
      const auto last = s.find_last_not_of(" \t\r");
      return first == std::string::npos ? std::string{} : s.substr(first, last - first + 1);
    };
    apply_config_value(base, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return base;
}

}  // namespace oasic
