#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "oasic/classifier.hpp"
#include "oasic/dataset.hpp"
#include "oasic/metrics.hpp"
#include "oasic/occlusion_synth.hpp"

namespace oasic {

/// The five ablation arms, in report order.
inline const std::vector<std::string> kConfigNames = {
    "oasic", "mask_only", "selection_only", "occlusion_trained", "clean_trained"};

struct ExperimentConfig {
  ToyParams toy;
  /// When set, `<dir>/train` and `<dir>/test` replace the toy dataset.
  std::optional<std::filesystem::path> dataset_dir;
  std::string features = "handcrafted";
  std::vector<double> pool_levels = default_pool_levels();
  std::string threshold = "otsu";  // or fixed:<tau>
  std::vector<std::string> test_occlusions = {"gray", "texture-a", "texture-b"};
  /// Fill of the single occlusion-trained baseline.
  std::string baseline_occlusion = "texture-a";
  std::vector<double> levels = default_pool_levels();
  std::vector<double> segmentation_levels = {0.2, 0.4, 0.6, 0.8};
  PerlinParams perlin;
  TrainParams train;
  std::uint64_t seed = 20251;
  std::filesystem::path out_dir = "oasic_out";
  bool dump_intermediates = false;
};

struct SegmentationCell {
  std::string occlusion;
  double level = 0.0;
  double mauroc = 0.0;
  double map = 0.0;

  friend bool operator==(const SegmentationCell&, const SegmentationCell&) = default;
};

struct SeverityCell {
  std::string occlusion;
  double level = 0.0;
  double mean_abs_error = 0.0;
  double mean_estimate = 0.0;

  friend bool operator==(const SeverityCell&, const SeverityCell&) = default;
};

struct Report {
  std::uint64_t seed = 0;
  std::vector<double> levels;
  std::map<std::string, EvalCurve> curves;  // keyed by config name
  std::map<std::string, double> auc_occ;
  /// Accuracy of each pool member on gray-occluded test images, keyed by
  /// the member's trained_p formatted "%.2f".
  std::map<std::string, EvalCurve> pool_curves;
  std::vector<SeverityCell> severity;
  std::vector<SegmentationCell> segmentation;
  double bank_a_lo = 0.0;
  double bank_a_hi = 0.0;

  friend bool operator==(const Report&, const Report&) = default;
};

/// Normalized area, or the single accuracy when the curve has one level.
double curve_summary(const EvalCurve& curve);

/// Named fill for a test occlusion type: "gray", "texture-a" (leaf-like) or
/// "texture-b" (smoke-like). Texture sources derive from `seed`.
FillSpec occlusion_fill(const std::string& type, std::uint64_t seed);

Report run_experiment(const ExperimentConfig& config);

/// report.json, curves.csv and segmentation.csv under `dir`.
void write_report(const Report& report, const std::filesystem::path& dir);
std::string report_to_json(const Report& report);
Report report_from_json(const std::string& text);

/// Flat `key = value` lines; `#` starts a comment. Keys mirror the CLI flags.
ExperimentConfig parse_config(const std::string& text, ExperimentConfig base = {});
void apply_config_value(ExperimentConfig& config, const std::string& key, const std::string& value);

}  // namespace oasic
