#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "oasic/occlusion_synth.hpp"
#include "oasic/patch_features.hpp"

namespace oasic {

/// Pooled image representation: mean patch vector, re-normalized.
std::vector<float> image_feature(const Image& image, const FeatureExtractor& extractor,
                                 const std::string& stem = {});

/// Multinomial logistic regression over pooled features.
class Classifier {
 public:
  Classifier() = default;
  Classifier(std::vector<std::string> labels, int dim, std::vector<float> weights,
             std::vector<float> bias, double trained_p, ExtractorDescriptor features);

  int classes() const { return static_cast<int>(labels_.size()); }
  int dim() const { return dim_; }
  double trained_p() const { return trained_p_; }
  const std::vector<std::string>& labels() const { return labels_; }
  const ExtractorDescriptor& features() const { return features_; }
  const std::vector<float>& weights() const { return weights_; }  // C x dim
  const std::vector<float>& bias() const { return bias_; }

  std::vector<double> probabilities(std::span<const float> x) const;
  int predict_index(std::span<const float> x) const;
  const std::string& predict(std::span<const float> x) const { return labels_[predict_index(x)]; }

  friend bool operator==(const Classifier&, const Classifier&) = default;

 private:
  std::vector<std::string> labels_;
  int dim_ = 0;
  std::vector<float> weights_;
  std::vector<float> bias_;
  double trained_p_ = 0.0;
  ExtractorDescriptor features_;
};

struct TrainParams {
  int epochs = 200;
  double step = 0.1;
  int batch = 32;
  std::uint64_t seed = 0;
};

/// Mean cross-entropy of softmax(W x + b) and its gradient. W is C x dim
/// row-major; grad_w / grad_b are resized to match.
double softmax_cross_entropy(std::span<const double> w, std::span<const double> b, int classes,
                             std::span<const std::vector<float>> features,
                             std::span<const int> targets, std::vector<double>* grad_w,
                             std::vector<double>* grad_b);

/// Zero-initialized mini-batch gradient descent; batches follow a per-epoch
/// shuffle drawn from params.seed.
Classifier train_on_features(std::span<const std::vector<float>> features,
                             std::span<const int> targets, std::vector<std::string> labels,
                             double trained_p, const ExtractorDescriptor& descriptor,
                             const TrainParams& params);

/// Trains on a (typically occluded) labeled set. Labels are sorted
/// lexicographically into the class table.
Classifier train_classifier(const LabeledSet& set, double p, const FeatureExtractor& extractor,
                            const TrainParams& params);

/// Pool of occlusion specialists f_[0,p], sorted by p.
struct PoolMember {
  double p = 0.0;
  Classifier model;
  std::uint64_t seed = 0;
  /// True coverages of the D_[0,p] images it was trained on.
  std::vector<double> train_coverages;
};

struct ModelPool {
  std::vector<PoolMember> members;

  bool empty() const { return members.empty(); }
  std::vector<double> keys() const;
  const PoolMember* find(double p) const;
};

std::vector<double> default_pool_levels();  // {0, 0.1, ..., 0.9}

struct PoolParams {
  std::vector<double> levels = default_pool_levels();
  PerlinParams perlin;
  TrainParams train;
  std::uint64_t seed = 0;
};

/// For each p: synthesize D_[0,p] with gray fill, train f_[0,p].
ModelPool train_pool(const LabeledSet& clean, const FeatureExtractor& extractor,
                     const PoolParams& params);

/// Member minimizing |s - p|; ties (within 1e-9) go to the larger p.
const PoolMember& select_model(const ModelPool& pool, double severity);

/// Directory layout: pool.json plus one f_<p>.model per member.
void write_pool(const ModelPool& pool, const std::filesystem::path& dir);
ModelPool read_pool(const std::filesystem::path& dir);

// "OCLS", u32 version = 1, u32 C, u32 dim, C*dim float32 weights, C float32
// biases, little-endian.
void write_model(const Classifier& model, const std::filesystem::path& path);
/// Labels, trained_p and descriptor come from the pool manifest.
Classifier read_model(const std::filesystem::path& path, std::vector<std::string> labels,
                      double trained_p, const ExtractorDescriptor& features);

}  // namespace oasic
