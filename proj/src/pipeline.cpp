#include "oasic/pipeline.hpp"

#include "oasic/thresholding.hpp"

namespace oasic {

Prediction oasic_predict(const ModelPool& pool, const MemoryBank& bank, const Image& image,
                         const FeatureExtractor& extractor, const std::string& stem) {
  Prediction out;
  out.map = score_image(bank, image, extractor, stem);
  out.threshold = otsu_threshold(out.map);
  out.mask = threshold_fixed(out.map, out.threshold);
  out.masked = gray_mask(image, out.mask);
  out.severity = estimate_severity(out.map).value;
  const PoolMember& chosen = select_model(pool, out.severity);
  out.selected_p = chosen.p;
  const std::string masked_stem = stem.empty() ? stem : stem + ".masked";
  out.label = chosen.model.predict(image_feature(out.masked, extractor, masked_stem));
  return out;
}

}  // namespace oasic
