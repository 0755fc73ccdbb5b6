#include "oasic/cli.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <sstream>

#include "oasic/anomaly_bank.hpp"
#include "oasic/classifier.hpp"
#include "oasic/dataset.hpp"
#include "oasic/error.hpp"
#include "oasic/harness.hpp"
#include "oasic/masking.hpp"
#include "oasic/occlusion_synth.hpp"
#include "oasic/pipeline.hpp"
#include "oasic/rng.hpp"
#include "oasic/thresholding.hpp"

namespace oasic {

namespace {

std::string fixed6(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

FillSpec parse_fill(const std::string& spec, int gray) {
  if (spec == "gray") return GrayFill{static_cast<std::uint8_t>(gray)};
  if (spec.starts_with("texture:")) return TextureFill{read_image(spec.substr(8)), 0};
  if (spec == "texture-a" || spec == "texture-b") return occlusion_fill(spec, 0);
  fail(ErrorKind::kInvalidArgument, "unknown fill '" + spec + "' (gray | texture:<png> | texture-a | texture-b)");
}

double parse_threshold(const std::string& mode, const AnomalyMap& map) {
  if (mode == "otsu") return otsu_threshold(map);
  if (mode.starts_with("fixed:")) {
    try {
      return std::stod(mode.substr(6));
    } catch (const std::logic_error&) {
    }
  }
  fail(ErrorKind::kInvalidArgument, "threshold must be otsu or fixed:<value>");
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kIo, "cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

int cli_dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Occlusion-agnostic segmentation and severity-informed classification"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  std::string features = "handcrafted";
  std::uint64_t seed = 0;
  PerlinParams perlin;
  auto add_perlin = [&](CLI::App* cmd) {
    cmd->add_option("--octaves", perlin.octaves, "Perlin octaves")->capture_default_str();
    cmd->add_option("--persistence", perlin.persistence, "Perlin persistence")->capture_default_str();
    cmd->add_option("--base-frequency", perlin.base_frequency, "Perlin base frequency")->capture_default_str();
  };

  // synth
  std::string synth_in, synth_out, fill_spec = "gray";
  double p_max = 0.5;
  std::optional<double> coverage;
  int gray = kMaskGray;
  auto* synth = app.add_subcommand("synth", "Occlude a labeled image directory");
  synth->add_option("--in", synth_in, "Labeled image directory <label>/<name>.png")->required();
  synth->add_option("--out", synth_out, "Output directory")->required();
  synth->add_option("--p-max", p_max, "Coverage drawn from U(0, p-max)")->capture_default_str();
  synth->add_option("--coverage", coverage, "Exact coverage for every image (overrides --p-max)");
  synth->add_option("--fill", fill_spec, "gray | texture:<png> | texture-a | texture-b")->capture_default_str();
  synth->add_option("--gray", gray, "Gray fill value")->check(CLI::Range(0, 255))->capture_default_str();
  synth->add_option("--seed", seed, "Seed");
  add_perlin(synth);

  // bank build / calibrate
  auto* bank_cmd = app.add_subcommand("bank", "Build or calibrate a memory bank");
  bank_cmd->require_subcommand(1);
  std::string bank_train, bank_out, bank_in, bank_clean;
  auto* bank_build = bank_cmd->add_subcommand("build", "Select one reference per class");
  bank_build->add_option("--train", bank_train, "Clean labeled image directory")->required();
  bank_build->add_option("--features", features, "handcrafted | oemb:<dir>")->capture_default_str();
  bank_build->add_option("--out", bank_out, "Output .bank file")->required();
  auto* bank_cal = bank_cmd->add_subcommand("calibrate", "Fit (a_lo, a_hi) on clean and gray-occluded images");
  bank_cal->add_option("--bank", bank_in, "Input .bank file")->required();
  bank_cal->add_option("--clean", bank_clean, "Clean labeled image directory")->required();
  bank_cal->add_option("--features", features, "handcrafted | oemb:<dir>")->capture_default_str();
  bank_cal->add_option("--seed", seed, "Seed for the occluded calibration copies");
  bank_cal->add_option("--out", bank_out, "Output .bank file")->required();
  add_perlin(bank_cal);

  // segment
  std::string seg_bank, seg_image, seg_amap, seg_mask, threshold = "otsu";
  auto* segment = app.add_subcommand("segment", "Score an image into an anomaly map and binary mask");
  segment->add_option("--bank", seg_bank, "Calibrated .bank file")->required();
  segment->add_option("--image", seg_image, "Input PNG")->required();
  segment->add_option("--features", features, "handcrafted | oemb:<dir>")->capture_default_str();
  segment->add_option("--threshold", threshold, "otsu | fixed:<value>")->capture_default_str();
  segment->add_option("--amap", seg_amap, "Output .amap")->required();
  segment->add_option("--mask", seg_mask, "Output mask PNG")->required();

  // mask
  std::string mask_image, mask_mask, mask_out;
  auto* mask = app.add_subcommand("mask", "Gray-mask the occluded pixels of an image");
  mask->add_option("--image", mask_image, "Input PNG")->required();
  mask->add_option("--mask", mask_mask, "Mask PNG")->required();
  mask->add_option("--out", mask_out, "Output PNG")->required();
  mask->add_option("--gray", gray, "Gray value")->check(CLI::Range(0, 255))->capture_default_str();

  // severity
  std::string sev_amap;
  auto* severity = app.add_subcommand("severity", "Print the estimated severity of an anomaly map");
  severity->add_option("amap", sev_amap, "Input .amap")->required();

  // train-pool
  std::string pool_train, pool_out;
  std::vector<double> pool_levels = default_pool_levels();
  TrainParams train;
  auto* train_pool_cmd = app.add_subcommand("train-pool", "Train f_[0,p] for every p");
  train_pool_cmd->add_option("--train", pool_train, "Clean labeled image directory")->required();
  train_pool_cmd->add_option("--features", features, "handcrafted | oemb:<dir>")->capture_default_str();
  train_pool_cmd->add_option("--levels", pool_levels, "Pool levels")->delimiter(',');
  train_pool_cmd->add_option("--epochs", train.epochs)->capture_default_str();
  train_pool_cmd->add_option("--step", train.step)->capture_default_str();
  train_pool_cmd->add_option("--batch", train.batch)->capture_default_str();
  train_pool_cmd->add_option("--seed", seed, "Seed");
  train_pool_cmd->add_option("--out", pool_out, "Output pool directory")->required();
  add_perlin(train_pool_cmd);

  // predict
  std::string pred_pool, pred_bank, pred_image;
  auto* predict = app.add_subcommand("predict", "Full pipeline on one image");
  predict->add_option("--pool", pred_pool, "Pool directory")->required();
  predict->add_option("--bank", pred_bank, "Calibrated .bank file")->required();
  predict->add_option("--image", pred_image, "Input PNG")->required();
  predict->add_option("--features", features, "handcrafted | oemb:<dir>")->capture_default_str();

  // evaluate
  std::string eval_config, eval_out;
  std::vector<std::pair<std::string, std::string>> overrides;
  bool dump = false;
  auto* evaluate = app.add_subcommand("evaluate", "Run the five-arm ablation experiment");
  evaluate->add_option("--config", eval_config, "Flat key = value config file");
  evaluate->add_option("--out", eval_out, "Output directory");
  evaluate->add_flag("--dump-intermediates", dump, "Write per-image artifacts");
  for (const char* key : {"seed", "classes", "per-class", "image-size", "dataset", "features", "threshold",
                          "levels", "pool-levels", "occlusions", "epochs"}) {
    evaluate->add_option_function<std::string>(
        std::string("--") + key, [&, key](const std::string& v) { overrides.emplace_back(key, v); },
        std::string("config key ") + key);
  }

  // toy
  std::string toy_out;
  ToyParams toy;
  auto* toy_cmd = app.add_subcommand("toy", "Write the procedural toy dataset");
  toy_cmd->add_option("--out", toy_out, "Output directory (train/ and test/)")->required();
  toy_cmd->add_option("--classes", toy.classes)->capture_default_str();
  toy_cmd->add_option("--per-class", toy.per_class)->capture_default_str();
  toy_cmd->add_option("--size", toy.size)->capture_default_str();
  toy_cmd->add_option("--seed", toy.seed)->capture_default_str();

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  try {
    if (*synth) {
      const LabeledSet items = read_labeled_dir(synth_in);
      const FillSpec fill = parse_fill(fill_spec, gray);
      std::vector<OccludedSample> samples;
      if (coverage) {
        require(*coverage >= 0.0 && *coverage <= 1.0, "--coverage outside [0,1]");
        for (std::size_t i = 0; i < items.size(); ++i) {
          samples.push_back(occlude_image(items[i], *coverage, perlin, fill, derive_seed(seed, i)));
        }
      } else {
        samples = synth_dataset(items, p_max, perlin, fill, seed);
      }
      write_occluded_dir(samples, synth_out);
      out << "wrote " << samples.size() << " occluded images to " << synth_out << "\n";
    } else if (*bank_build) {
      const auto extractor = make_extractor(features);
      const MemoryBank bank = build_bank(read_labeled_dir(bank_train), *extractor);
      write_bank(bank, bank_out);
      out << "bank: " << bank.labels.size() << " classes, " << bank.size() << " entries\n";
    } else if (*bank_cal) {
      const auto extractor = make_extractor(features);
      const LabeledSet clean = read_labeled_dir(bank_clean);
      MemoryBank bank = calibrate(read_bank(bank_in), clean, *extractor, perlin, seed);
      write_bank(bank, bank_out);
      out << "a_lo " << fixed6(bank.a_lo) << "\na_hi " << fixed6(bank.a_hi) << "\n";
    } else if (*segment) {
      const auto extractor = make_extractor(features);
      const MemoryBank bank = read_bank(seg_bank);
      const Image image = read_image(seg_image);
      const AnomalyMap map = score_image(bank, image, *extractor, std::filesystem::path(seg_image).stem().string());
      const double tau = parse_threshold(threshold, map);
      write_amap(map, seg_amap);
      write_mask(threshold_fixed(map, tau), seg_mask);
      out << "threshold " << fixed6(tau) << "\n";
    } else if (*mask) {
      write_image(gray_mask(read_image(mask_image), read_mask(mask_mask), static_cast<std::uint8_t>(gray)),
                  mask_out);
    } else if (*severity) {
      out << fixed6(estimate_severity(read_amap(sev_amap)).value) << "\n";
    } else if (*train_pool_cmd) {
      const auto extractor = make_extractor(features);
      PoolParams params;
      params.levels = pool_levels;
      params.perlin = perlin;
      params.train = train;
      params.seed = seed;
      const ModelPool pool = train_pool(read_labeled_dir(pool_train), *extractor, params);
      write_pool(pool, pool_out);
      out << "pool: " << pool.members.size() << " members written to " << pool_out << "\n";
    } else if (*predict) {
      const auto extractor = make_extractor(features);
      const Prediction p = oasic_predict(read_pool(pred_pool), read_bank(pred_bank), read_image(pred_image),
                                         *extractor, std::filesystem::path(pred_image).stem().string());
      out << "label " << p.label << "\nseverity " << fixed6(p.severity) << "\nthreshold "
          << fixed6(p.threshold) << "\nmodel_p " << fixed6(p.selected_p) << "\n";
    } else if (*evaluate) {
      ExperimentConfig config;
      if (!eval_config.empty()) config = parse_config(slurp(eval_config));
      for (const auto& [k, v] : overrides) apply_config_value(config, k, v);
      if (!eval_out.empty()) config.out_dir = eval_out;
      if (dump) config.dump_intermediates = true;
      const Report report = run_experiment(config);
      write_report(report, config.out_dir);
      for (const auto& name : kConfigNames) out << name << " auc_occ " << fixed6(report.auc_occ.at(name)) << "\n";
    } else if (*toy_cmd) {
      const ToyDataset data = gen_toy_dataset(toy);
      write_labeled_dir(data.train, std::filesystem::path(toy_out) / "train");
      write_labeled_dir(data.test, std::filesystem::path(toy_out) / "test");
      out << "toy dataset: " << data.train.size() << " train, " << data.test.size() << " test\n";
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitOk;
}

}  // namespace oasic
