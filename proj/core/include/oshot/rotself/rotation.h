#pragma once

#include <optional>
#include <vector>

#include <torch/torch.h>

#include "oshot/common/box.h"
#include "oshot/common/rng.h"
#include "oshot/detcore/detector.h"
#include "oshot/detcore/params.h"

namespace oshot::rot {

constexpr int kNumRotations = 4;

struct CropResult {
  torch::Tensor patch;  // C x s x s
  // The box left no cells after mapping to the feature grid; the whole map
  // was pooled instead.
  bool fallback = false;
};

// Pools the feature cells under `box` (image coordinates) to s x s by
// adaptive averaging. Differentiable w.r.t. the map.
CropResult boxcrop(const det::FeatureMap& fmap, const Box& box, int out_size);

// boxcrop on the map of the rotated image, with the box recalibrated from the
// unrotated frame by rotate_box. The unrotated frame size is recovered from
// the rotated map's source dimensions.
CropResult pseudoboxcrop(const det::FeatureMap& rotated_fmap, const Box& pseudo_box, int q,
                         int out_size);

// Rotate an image tensor (... x H x W) by q counter-clockwise quarter turns.
torch::Tensor rotate_tensor(const torch::Tensor& image, int q);

// Top-scoring detection on the unrotated image with score at or above the
// pseudo-label threshold; nullopt when none passes. Only its box is used
// downstream.
std::optional<det::Detection> pseudo_label(const torch::Tensor& image, const det::ParamGroup& feature,
                                           const det::ParamGroup& detection,
                                           const det::DetectorConfig& cfg);

enum class BoxSource { kGroundTruth, kPseudo, kFullImageFallback };
const char* to_string(BoxSource s);

struct RotationTarget {
  Box box;  // unrotated frame
  BoxSource source = BoxSource::kGroundTruth;
};

// Pseudo-label box, or the full image when there is no confident detection.
RotationTarget pseudo_target(const torch::Tensor& image, const det::ParamGroup& feature,
                             const det::ParamGroup& detection, const det::DetectorConfig& cfg);

// FC over the flattened patch -> 4 logits.
torch::Tensor rotation_logits(const torch::Tensor& patches, const det::ParamGroup& rotation);

struct RotationLoss {
  torch::Tensor loss;  // scalar cross-entropy
  int q = 0;
  bool crop_fallback = false;
};

// L_r for one image (3 x H x W) and one rotation: rotate, extract features,
// crop the target box recalibrated to the rotated frame, classify, and take
// the cross-entropy against q. Depends only on the feature and rotation
// groups. Throws TrainingFault on a non-finite loss.
RotationLoss rotation_loss(const torch::Tensor& image, const RotationTarget& target, int q,
                           const det::ParamGroup& feature, const det::ParamGroup& rotation,
                           const det::DetectorConfig& cfg);

// Same with q drawn uniformly from `rng`.
RotationLoss rotation_loss(const torch::Tensor& image, const RotationTarget& target, Rng& rng,
                           const det::ParamGroup& feature, const det::ParamGroup& rotation,
                           const det::DetectorConfig& cfg);

// Batched form for multi-task pretraining: one (image, target, q) per row;
// returns the mean cross-entropy. Images must share a size.
torch::Tensor rotation_loss_batch(const std::vector<torch::Tensor>& images,
                                  const std::vector<RotationTarget>& targets,
                                  const std::vector<int>& qs, const det::ParamGroup& feature,
                                  const det::ParamGroup& rotation, const det::DetectorConfig& cfg);

// Mean of L_r over all four rotations, with no gradient. Used to measure
// adaptation progress with the rotation draw factored out.
double rotation_loss_all(const torch::Tensor& image, const RotationTarget& target,
                         const det::ParamGroup& feature, const det::ParamGroup& rotation,
                         const det::DetectorConfig& cfg);

// Fraction of the four rotations classified correctly, averaged over the
// given (image, box) pairs.
double rotation_accuracy(const std::vector<torch::Tensor>& images, const std::vector<Box>& boxes,
                         const det::ParamGroup& feature, const det::ParamGroup& rotation,
                         const det::DetectorConfig& cfg);

}  // namespace oshot::rot
