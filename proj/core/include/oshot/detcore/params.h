#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <torch/torch.h>

#include "oshot/common/config.h"

namespace oshot::det {

// An ordered set of named tensors. The tensors may be leaves (persistent
// parameters) or graph-connected values (adapted copies inside an inner loop).
class ParamGroup {
 public:
  void add(std::string name, torch::Tensor value);
  const torch::Tensor& at(std::string_view name) const;
  bool contains(std::string_view name) const;

  const std::vector<std::string>& names() const { return names_; }
  const std::vector<torch::Tensor>& tensors() const { return values_; }
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }
  std::int64_t numel() const;

  // Same names, new values (in order). Shapes must match.
  ParamGroup with_values(std::vector<torch::Tensor> values) const;
  // Detached deep copy; leaves require grad when `requires_grad`.
  ParamGroup clone(bool requires_grad) const;
  ParamGroup to(torch::Dtype dtype) const;

  // Bitwise equality of names, shapes, dtypes and contents.
  bool identical(const ParamGroup& other) const;

 private:
  std::vector<std::string> names_;
  std::vector<torch::Tensor> values_;
};

struct DetectorConfig {
  int num_classes = 5;
  std::vector<int> channels{16, 32, 32, 48, 48, 64};
  std::vector<int> strides{1, 2, 1, 2, 1, 2};
  // GroupNorm groups; 0 disables normalization.
  int norm_groups = 4;
  // Identity activations everywhere (toy models for gradient checks).
  bool linear = false;
  int rpn_channels = 64;
  std::vector<double> anchor_scales{16.0, 24.0, 36.0};
  // Height / width.
  std::vector<double> anchor_ratios{1.0, 0.7};
  int pool_size = 5;
  int roi_hidden = 128;
  int pre_nms_top_n = 200;
  int post_nms_train = 64;
  int post_nms_eval = 32;
  double rpn_nms_iou = 0.7;
  double roi_nms_iou = 0.5;
  double rpn_positive_iou = 0.5;
  double rpn_negative_iou = 0.3;
  double roi_positive_iou = 0.5;
  double eval_score_threshold = 0.05;
  double pseudo_score_threshold = 0.8;
  double smooth_l1_beta = 1.0;
  torch::Dtype dtype = torch::kFloat32;

  int feature_stride() const;
  int feature_channels() const { return channels.back(); }
  int anchors_per_cell() const {
    return static_cast<int>(anchor_scales.size() * anchor_ratios.size());
  }

  void validate() const;
  // Round trip through the flat key-value format with a `det.` prefix.
  void write(KeyValueConfig& cfg) const;
  static DetectorConfig read(const KeyValueConfig& cfg);
};

// The three parameter groups: feature extractor, detection head (RPN + ROI),
// rotation head.
struct ModelParams {
  ParamGroup feature;
  ParamGroup detection;
  ParamGroup rotation;

  ModelParams clone(bool requires_grad) const;
};

// Deterministic initialization from `seed`. Conv/linear weights are He/normal,
// RPN and ROI output layers use small normal weights, the rotation head
// starts at zero (uniform rotation logits).
ModelParams init_params(const DetectorConfig& cfg, std::uint64_t seed);

}  // namespace oshot::det
