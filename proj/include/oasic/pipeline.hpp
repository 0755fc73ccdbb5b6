#pragma once

#include <string>

#include "oasic/anomaly_bank.hpp"
#include "oasic/classifier.hpp"
#include "oasic/imaging.hpp"
#include "oasic/masking.hpp"

namespace oasic {

struct Prediction {
  std::string label;
  double severity = 0.0;   // mean of the anomaly map
  double threshold = 0.0;  // Otsu threshold applied to the map
  double selected_p = 0.0;
  AnomalyMap map;
  OcclusionMask mask;
  Image masked;
};

/// Score -> Otsu threshold -> gray mask -> severity -> select f_[0,p*] ->
/// classify the masked image. With precomputed embeddings, the masked image
/// is looked up under `<stem>.masked`.
Prediction oasic_predict(const ModelPool& pool, const MemoryBank& bank, const Image& image,
                         const FeatureExtractor& extractor, const std::string& stem = {});

}  // namespace oasic
