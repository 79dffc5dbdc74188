#pragma once

#include <vector>

#include <torch/torch.h>

#include "oshot/common/box.h"
#include "oshot/detcore/params.h"
#include "oshot/synthgen/image.h"

namespace oshot::det {

struct FeatureMap {
  torch::Tensor values;  // C x Hf x Wf
  int stride = 8;
  int source_width = 0;
  int source_height = 0;

  int width() const { return static_cast<int>(values.size(2)); }
  int height() const { return static_cast<int>(values.size(1)); }
};

struct Detection {
  int class_id = 0;
  Box box;
  double score = 0.0;

  friend bool operator==(const Detection&, const Detection&) = default;
};

struct Proposal {
  Box box;
  double objectness = 0.0;
};

enum class Mode { kTrain, kEval };

// 3 x H x W tensor of the given dtype.
torch::Tensor to_tensor(const synth::Image& img, torch::Dtype dtype);

// Batched feature extractor: N x 3 x H x W -> N x C x H/stride x W/stride.
// Throws std::invalid_argument when H or W is not a stride multiple.
torch::Tensor backbone(const torch::Tensor& images, const ParamGroup& feature,
                       const DetectorConfig& cfg);

// Single image (3 x H x W).
FeatureMap extract_features(const torch::Tensor& image, const ParamGroup& feature,
                            const DetectorConfig& cfg);
FeatureMap feature_map_of(const torch::Tensor& batch_maps, int index, int source_width,
                          int source_height, const DetectorConfig& cfg);

// Anchors ordered (row, column, anchor) to match the RPN outputs.
std::vector<Box> make_anchors(int map_width, int map_height, const DetectorConfig& cfg);

struct RpnOutput {
  torch::Tensor objectness;  // A_total logits
  torch::Tensor deltas;      // A_total x 4
};

RpnOutput rpn_forward(const FeatureMap& fmap, const ParamGroup& detection,
                      const DetectorConfig& cfg);

// Decode, clip, NMS and keep the top N of an RPN output (no gradient).
std::vector<Proposal> proposals_from(const RpnOutput& rpn, const FeatureMap& fmap,
                                     const DetectorConfig& cfg, Mode mode);
std::vector<Proposal> propose_regions(const FeatureMap& fmap, const ParamGroup& detection,
                                      const DetectorConfig& cfg, Mode mode);

struct RoiOutput {
  torch::Tensor class_logits;  // R x (num_classes + 1); column 0 is background
  torch::Tensor box_deltas;    // R x 4, class-agnostic
};

RoiOutput roi_forward(const FeatureMap& fmap, const std::vector<Box>& rois,
                      const ParamGroup& detection, const DetectorConfig& cfg);

// Classifies proposals, drops background-argmax ones, refines boxes, applies
// class-wise NMS then the score threshold. Sorted by descending score.
std::vector<Detection> roi_classify(const FeatureMap& fmap, const std::vector<Proposal>& proposals,
                                    const ParamGroup& detection, const DetectorConfig& cfg,
                                    double score_threshold);

// Full eval-mode inference on one 3 x H x W image.
std::vector<Detection> detect(const torch::Tensor& image, const ParamGroup& feature,
                              const ParamGroup& detection, const DetectorConfig& cfg,
                              double score_threshold);

struct DetectionLoss {
  torch::Tensor rpn_objectness;
  torch::Tensor rpn_box;
  torch::Tensor roi_class;
  torch::Tensor roi_box;
  // Proposals used as ROIs (ground-truth boxes are appended on top of these).
  std::vector<Box> proposals;

  torch::Tensor total() const { return rpn_objectness + rpn_box + roi_class + roi_box; }
};

// L_d: RPN objectness cross-entropy (positive and negative anchors averaged
// separately) + RPN smooth-L1 on positives + ROI class cross-entropy + ROI
// smooth-L1 on foreground ROIs, equally weighted. Proposals are treated as
// constants; `proposals_override` replaces the ones the RPN would produce.
// Throws TrainingFault on a non-finite loss.
DetectionLoss detection_loss(const FeatureMap& fmap, const std::vector<BoxLabel>& labels,
                             const ParamGroup& detection, const DetectorConfig& cfg,
                             const std::vector<Box>* proposals_override = nullptr);
DetectionLoss detection_loss(const torch::Tensor& image, const std::vector<BoxLabel>& labels,
                             const ParamGroup& feature, const ParamGroup& detection,
                             const DetectorConfig& cfg,
                             const std::vector<Box>* proposals_override = nullptr);

}  // namespace oshot::det
