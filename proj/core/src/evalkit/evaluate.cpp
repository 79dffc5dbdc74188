#include "oshot/evalkit/evaluate.h"

namespace oshot::eval {

std::vector<ImageEval> evaluate_dataset(const std::vector<synth::AnnotatedImage>& data,
                                        const det::ParamGroup& feature,
                                        const det::ParamGroup& detection,
                                        const det::DetectorConfig& cfg) {
  std::vector<ImageEval> out;
  out.reserve(data.size());
  for (const auto& item : data) {
    auto x = det::to_tensor(item.image, cfg.dtype);
    out.push_back({det::detect(x, feature, detection, cfg, cfg.eval_score_threshold), item.labels});
  }
  return out;
}

double dataset_map(const std::vector<synth::AnnotatedImage>& data, const det::ParamGroup& feature,
                   const det::ParamGroup& detection, const det::DetectorConfig& cfg) {
  return mean_average_precision(evaluate_dataset(data, feature, detection, cfg), cfg.num_classes);
}

}  // namespace oshot::eval
