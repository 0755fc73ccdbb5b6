#include "oasic/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <set>

#include <json.hpp>

#include "binio.hpp"
#include "oasic/anomaly_bank.hpp"
#include "oasic/error.hpp"
#include "oasic/parallel.hpp"
#include "oasic/rng.hpp"

namespace oasic {

std::vector<float> image_feature(const Image& image, const FeatureExtractor& extractor,
                                 const std::string& stem) {
  return pooled_embedding(extractor.extract(image, stem));
}

Classifier::Classifier(std::vector<std::string> labels, int dim, std::vector<float> weights,
                       std::vector<float> bias, double trained_p, ExtractorDescriptor features)
    : labels_(std::move(labels)),
      dim_(dim),
      weights_(std::move(weights)),
      bias_(std::move(bias)),
      trained_p_(trained_p),
      features_(std::move(features)) {
  require(labels_.size() >= 2, "Classifier: need at least 2 classes");
  require(dim_ > 0, "Classifier: dim must be > 0");
  require(weights_.size() == labels_.size() * static_cast<std::size_t>(dim_),
          "Classifier: weight matrix is not C x dim");
  require(bias_.size() == labels_.size(), "Classifier: bias length is not C");
  require(trained_p_ >= 0.0 && trained_p_ <= 1.0, "Classifier: trained_p outside [0,1]");
}

std::vector<double> Classifier::probabilities(std::span<const float> x) const {
  require(x.size() == static_cast<std::size_t>(dim_), "Classifier: feature dim mismatch");
  std::vector<double> z(labels_.size());
  for (std::size_t c = 0; c < z.size(); ++c) {
    double s = bias_[c];
    for (int d = 0; d < dim_; ++d) s += static_cast<double>(weights_[c * dim_ + d]) * x[d];
    z[c] = s;
  }
  const double max = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (double& v : z) sum += (v = std::exp(v - max));
  for (double& v : z) v /= sum;
  return z;
}

int Classifier::predict_index(std::span<const float> x) const {
  const std::vector<double> p = probabilities(x);
  return static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
}

double softmax_cross_entropy(std::span<const double> w, std::span<const double> b, int classes,
                             std::span<const std::vector<float>> features,
                             std::span<const int> targets, std::vector<double>* grad_w,
                             std::vector<double>* grad_b) {
  require(!features.empty() && features.size() == targets.size(),
          "softmax_cross_entropy: features/targets mismatch");
  const auto C = static_cast<std::size_t>(classes);
  const std::size_t dim = features.front().size();
  require(w.size() == C * dim && b.size() == C, "softmax_cross_entropy: parameter shape mismatch");
  if (grad_w) grad_w->assign(C * dim, 0.0);
  if (grad_b) grad_b->assign(C, 0.0);

  std::vector<double> z(C);
  double loss = 0.0;
  for (std::size_t n = 0; n < features.size(); ++n) {
    const auto& x = features[n];
    for (std::size_t c = 0; c < C; ++c) {
      double s = b[c];
      for (std::size_t d = 0; d < dim; ++d) s += w[c * dim + d] * x[d];
      z[c] = s;
    }
    const double max = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (double v : z) sum += std::exp(v - max);
    const double log_sum = max + std::log(sum);
    const auto y = static_cast<std::size_t>(targets[n]);
    loss += log_sum - z[y];
    if (!grad_w && !grad_b) continue;
    for (std::size_t c = 0; c < C; ++c) {
      const double r = std::exp(z[c] - log_sum) - (c == y ? 1.0 : 0.0);
      if (grad_b) (*grad_b)[c] += r;
      if (grad_w) {
        for (std::size_t d = 0; d < dim; ++d) (*grad_w)[c * dim + d] += r * x[d];
      }
    }
  }
  const double inv = 1.0 / static_cast<double>(features.size());
  if (grad_w) for (double& g : *grad_w) g *= inv;
  if (grad_b) for (double& g : *grad_b) g *= inv;
  return loss * inv;
}

Classifier train_on_features(std::span<const std::vector<float>> features,
                             std::span<const int> targets, std::vector<std::string> labels,
                             double trained_p, const ExtractorDescriptor& descriptor,
                             const TrainParams& params) {
  if (features.empty()) fail(ErrorKind::kInvalidArgument, "train: empty training set");
  require(features.size() == targets.size(), "train: features/targets mismatch");
  if (labels.size() < 2) fail(ErrorKind::kInvalidArgument, "train: need at least 2 classes");
  require(params.epochs >= 1 && params.batch >= 1 && params.step > 0.0, "train: invalid hyperparameters");
  const int C = static_cast<int>(labels.size());
  const std::size_t dim = features.front().size();
  for (int t : targets) require(t >= 0 && t < C, "train: target out of range");
  for (const auto& x : features) require(x.size() == dim, "train: inconsistent feature dims");

  // Descent runs on centered features z = (x - mean) / scale with one
  // global scale (RMS of the per-dimension deviations), which keeps the
  // raw feature geometry. The result is folded back so the stored model
  // acts on raw features: W_raw = W / scale, b_raw = b - W_raw . mean.
  const auto n = static_cast<double>(features.size());
  std::vector<double> mean(dim, 0.0);
  for (const auto& x : features) {
    for (std::size_t d = 0; d < dim; ++d) mean[d] += x[d] / n;
  }
  double ss = 0.0;
  for (const auto& x : features) {
    for (std::size_t d = 0; d < dim; ++d) ss += (x[d] - mean[d]) * (x[d] - mean[d]);
  }
  const double rms = std::sqrt(ss / (n * static_cast<double>(dim)));
  const std::vector<double> scale(dim, rms > 1e-12 ? rms : 1.0);
  std::vector<std::vector<float>> centered(features.size(), std::vector<float>(dim));
  for (std::size_t i = 0; i < features.size(); ++i) {
    for (std::size_t d = 0; d < dim; ++d) {
      centered[i][d] = static_cast<float>((features[i][d] - mean[d]) / scale[d]);
    }
  }

  std::vector<double> w(static_cast<std::size_t>(C) * dim, 0.0);
  std::vector<double> b(static_cast<std::size_t>(C), 0.0);
  std::vector<double> gw;
  std::vector<double> gb;
  std::vector<std::size_t> order(features.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(params.seed);
  std::vector<std::vector<float>> batch_x;
  std::vector<int> batch_y;

  for (int epoch = 0; epoch < params.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(params.batch)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(params.batch));
      batch_x.clear();
      batch_y.clear();
      for (std::size_t k = start; k < end; ++k) {
        batch_x.push_back(centered[order[k]]);
        batch_y.push_back(targets[order[k]]);
      }
      softmax_cross_entropy(w, b, C, batch_x, batch_y, &gw, &gb);
      for (std::size_t k = 0; k < w.size(); ++k) w[k] -= params.step * gw[k];
      for (std::size_t k = 0; k < b.size(); ++k) b[k] -= params.step * gb[k];
    }
  }

  std::vector<float> wf(w.size());
  std::vector<float> bf(b.size());
  for (std::size_t c = 0; c < static_cast<std::size_t>(C); ++c) {
    double shift = 0.0;
    for (std::size_t d = 0; d < dim; ++d) {
      const double raw = w[c * dim + d] / scale[d];
      wf[c * dim + d] = static_cast<float>(raw);
      shift += raw * mean[d];
    }
    bf[c] = static_cast<float>(b[c] - shift);
  }
  return Classifier(std::move(labels), static_cast<int>(dim), std::move(wf), std::move(bf),
                    trained_p, descriptor);
}

namespace {

std::vector<std::string> label_table(const LabeledSet& set) {
  const std::set<std::string> unique = [&] {
    std::set<std::string> s;
    for (const auto& item : set) s.insert(item.label);
    return s;
  }();
  return {unique.begin(), unique.end()};
}

std::vector<int> label_indices(const LabeledSet& set, const std::vector<std::string>& labels) {
  std::vector<int> out;
  out.reserve(set.size());
  for (const auto& item : set) {
    out.push_back(static_cast<int>(std::lower_bound(labels.begin(), labels.end(), item.label) - labels.begin()));
  }
  return out;
}

std::vector<std::vector<float>> features_of(const LabeledSet& set, const FeatureExtractor& extractor) {
  std::vector<std::vector<float>> out(set.size());
  parallel_for(set.size(), [&](std::size_t i) {
    out[i] = image_feature(set[i].image, extractor, set[i].name);
  });
  return out;
}

std::string key_name(double p) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", p);
  return buf;
}

}  // namespace

Classifier train_classifier(const LabeledSet& set, double p, const FeatureExtractor& extractor,
                            const TrainParams& params) {
  if (set.empty()) fail(ErrorKind::kInvalidArgument, "train_classifier: empty set");
  std::vector<std::string> labels = label_table(set);
  if (labels.size() < 2) fail(ErrorKind::kInvalidArgument, "train_classifier: single class");
  const std::vector<int> targets = label_indices(set, labels);
  return train_on_features(features_of(set, extractor), targets, std::move(labels), p,
                           extractor.descriptor(), params);
}

std::vector<double> ModelPool::keys() const {
  std::vector<double> k;
  for (const auto& m : members) k.push_back(m.p);
  return k;
}

const PoolMember* ModelPool::find(double p) const {
  for (const auto& m : members) {
    if (std::abs(m.p - p) < 1e-9) return &m;
  }
  return nullptr;
}

std::vector<double> default_pool_levels() {
  std::vector<double> levels;
  for (int k = 0; k <= 9; ++k) levels.push_back(k / 10.0);
  return levels;
}

ModelPool train_pool(const LabeledSet& clean, const FeatureExtractor& extractor,
                     const PoolParams& params) {
  require(!params.levels.empty(), "train_pool: empty level set");
  std::vector<double> levels = params.levels;
  std::sort(levels.begin(), levels.end());
  for (std::size_t i = 0; i < levels.size(); ++i) {
    require(levels[i] >= 0.0 && levels[i] <= 1.0, "train_pool: level outside [0,1]");
    if (i > 0) require(levels[i] > levels[i - 1], "train_pool: duplicate level");
  }

  ModelPool pool;
  for (double p : levels) {
    const std::uint64_t seed = derive_seed(params.seed, "pool-" + key_name(p));
    const std::vector<OccludedSample> occluded =
        synth_dataset(clean, p, params.perlin, GrayFill{}, derive_seed(seed, "synth"));
    LabeledSet set;
    set.reserve(occluded.size());
    PoolMember member;
    member.p = p;
    member.seed = seed;
    for (const auto& s : occluded) {
      set.push_back({s.name, s.label, s.image});
      member.train_coverages.push_back(s.coverage);
    }
    TrainParams tp = params.train;
    tp.seed = derive_seed(seed, "train");
    member.model = train_classifier(set, p, extractor, tp);
    pool.members.push_back(std::move(member));
  }
  return pool;
}

const PoolMember& select_model(const ModelPool& pool, double severity) {
  if (pool.empty()) fail(ErrorKind::kInvalidArgument, "select_model: empty pool");
  require(severity >= 0.0 && severity <= 1.0, "select_model: severity outside [0,1]");
  const PoolMember* best = &pool.members.front();
  double best_gap = std::abs(severity - best->p);
  for (const auto& m : pool.members) {
    const double gap = std::abs(severity - m.p);
    if (gap < best_gap - 1e-9 || (std::abs(gap - best_gap) <= 1e-9 && m.p > best->p)) {
      best = &m;
      best_gap = gap;
    }
  }
  return *best;
}

void write_model(const Classifier& model, const std::filesystem::path& path) {
  detail::ByteWriter out;
  out.magic("OCLS");
  out.u32(1);
  out.u32(static_cast<std::uint32_t>(model.classes()));
  out.u32(static_cast<std::uint32_t>(model.dim()));
  for (float v : model.weights()) out.f32(v);
  for (float v : model.bias()) out.f32(v);
  detail::write_file(path, out.bytes());
}

Classifier read_model(const std::filesystem::path& path, std::vector<std::string> labels,
                      double trained_p, const ExtractorDescriptor& features) {
  const std::vector<std::uint8_t> bytes = detail::read_file(path);
  detail::ByteReader in(bytes, path.string());
  in.expect_magic("OCLS");
  if (in.u32() != 1) fail(ErrorKind::kFormat, path.string() + ": unsupported version");
  const std::uint32_t C = in.u32();
  const std::uint32_t dim = in.u32();
  if (C != labels.size()) fail(ErrorKind::kFormat, path.string() + ": class count disagrees with manifest");
  if (dim == 0) fail(ErrorKind::kFormat, path.string() + ": dim = 0");
  in.expect_remaining((std::size_t{C} * dim + C) * 4);
  std::vector<float> w(std::size_t{C} * dim);
  std::vector<float> b(C);
  for (float& v : w) v = in.f32();
  for (float& v : b) v = in.f32();
  return Classifier(std::move(labels), static_cast<int>(dim), std::move(w), std::move(b), trained_p, features);
}

void write_pool(const ModelPool& pool, const std::filesystem::path& dir) {
  require(!pool.empty(), "write_pool: empty pool");
  std::filesystem::create_directories(dir);
  const Classifier& first = pool.members.front().model;
  nlohmann::json manifest;
  manifest["version"] = 1;
  manifest["labels"] = first.labels();
  manifest["features"] = {{"name", first.features().name},
                          {"dim", first.features().dim},
                          {"patch_size", first.features().patch_size}};
  manifest["keys"] = pool.keys();
  nlohmann::json members = nlohmann::json::array();
  for (const auto& m : pool.members) {
    require(m.model.labels() == first.labels(), "write_pool: members disagree on labels");
    const std::string file = "f_" + key_name(m.p) + ".model";
    write_model(m.model, dir / file);
    members.push_back({{"p", m.p}, {"file", file}, {"seed", m.seed}});
  }
  manifest["members"] = std::move(members);
  const std::string text = manifest.dump(2) + "\n";
  detail::write_file(dir / "pool.json",
                     {reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
}

ModelPool read_pool(const std::filesystem::path& dir) {
  const std::vector<std::uint8_t> bytes = detail::read_file(dir / "pool.json");
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(bytes.begin(), bytes.end());
    const auto labels = manifest.at("labels").get<std::vector<std::string>>();
    const auto& f = manifest.at("features");
    const ExtractorDescriptor features{f.at("name").get<std::string>(), f.at("dim").get<int>(),
                                       f.at("patch_size").get<int>()};
    ModelPool pool;
    for (const auto& m : manifest.at("members")) {
      PoolMember member;
      member.p = m.at("p").get<double>();
      member.seed = m.at("seed").get<std::uint64_t>();
      member.model = read_model(dir / m.at("file").get<std::string>(), labels, member.p, features);
      pool.members.push_back(std::move(member));
    }
    std::sort(pool.members.begin(), pool.members.end(),
              [](const PoolMember& a, const PoolMember& b) { return a.p < b.p; });
    if (pool.empty()) fail(ErrorKind::kFormat, "pool.json lists no members");
    return pool;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kFormat, (dir / "pool.json").string() + ": " + e.what());
  }
}

}  // namespace oasic
