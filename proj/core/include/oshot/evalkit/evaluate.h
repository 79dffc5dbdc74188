#pragma once

#include <vector>

#include "oshot/detcore/detector.h"
#include "oshot/evalkit/metrics.h"
#include "oshot/synthgen/image.h"

namespace oshot::eval {

// Eval-mode inference over a labelled set.
std::vector<ImageEval> evaluate_dataset(const std::vector<synth::AnnotatedImage>& data,
                                        const det::ParamGroup& feature,
                                        const det::ParamGroup& detection,
                                        const det::DetectorConfig& cfg);

double dataset_map(const std::vector<synth::AnnotatedImage>& data, const det::ParamGroup& feature,
                   const det::ParamGroup& detection, const det::DetectorConfig& cfg);

}  // namespace oshot::eval
