#include "oshot/rotself/rotation.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "oshot/common/errors.h"
#include "oshot/detcore/pooling.h"
#include "oshot/synthgen/image.h"

namespace oshot::rot {

const char* to_string(BoxSource s) {
  switch (s) {
    case BoxSource::kGroundTruth: return "ground-truth";
    case BoxSource::kPseudo: return "pseudo";
    case BoxSource::kFullImageFallback: return "full-image";
  }
  return "unknown";
}

CropResult boxcrop(const det::FeatureMap& fmap, const Box& box, int out_size) {
  if (out_size < 1) throw std::invalid_argument("boxcrop: out_size must be >= 1");
  auto cells = det::box_to_cells(box, fmap.stride, fmap.width(), fmap.height());
  CropResult out;
  if (!cells) {
    out.fallback = true;
    cells = det::CellRange{0, 0, fmap.width(), fmap.height()};
  }
  out.patch = det::pool_cells(fmap.values, {*cells}, out_size)[0];
  return out;
}

CropResult pseudoboxcrop(const det::FeatureMap& rotated_fmap, const Box& pseudo_box, int q,
                         int out_size) {
  const bool odd = (q % 2) == 1;
  const double w = odd ? rotated_fmap.source_height : rotated_fmap.source_width;
  const double h = odd ? rotated_fmap.source_width : rotated_fmap.source_height;
  Box recalibrated = pseudo_box;
  if (pseudo_box.valid_in(w, h)) {
    recalibrated = synth::rotate_box(pseudo_box, q, w, h);
  } else if (q != 0) {
    // Degenerate boxes carry no geometry to recalibrate; boxcrop falls back.
    recalibrated = Box{};
  }
  return boxcrop(rotated_fmap, recalibrated, out_size);
}

torch::Tensor rotate_tensor(const torch::Tensor& image, int q) {
  if (q < 0 || q > 3) throw std::invalid_argument("rotation q must be in {0,1,2,3}");
  if (q == 0) return image;
  const auto d = image.dim();
  return torch::rot90(image, q, {d - 2, d - 1});
}

std::optional<det::Detection> pseudo_label(const torch::Tensor& image, const det::ParamGroup& feature,
                                           const det::ParamGroup& detection,
                                           const det::DetectorConfig& cfg) {
  const auto dets = det::detect(image, feature, detection, cfg, cfg.pseudo_score_threshold);
  if (dets.empty()) return std::nullopt;
  return dets.front();
}

RotationTarget pseudo_target(const torch::Tensor& image, const det::ParamGroup& feature,
                             const det::ParamGroup& detection, const det::DetectorConfig& cfg) {
  if (auto d = pseudo_label(image, feature, detection, cfg)) {
    return {d->box, BoxSource::kPseudo};
  }
  return {Box{0.0, 0.0, static_cast<double>(image.size(2)), static_cast<double>(image.size(1))},
          BoxSource::kFullImageFallback};
}

torch::Tensor rotation_logits(const torch::Tensor& patches, const det::ParamGroup& rotation) {
  auto x = patches.dim() == 3 ? patches.unsqueeze(0) : patches;
  return torch::addmm(rotation.at("rot.fc.bias"), x.flatten(1), rotation.at("rot.fc.weight").t());
}

namespace {

torch::Tensor cross_entropy(const torch::Tensor& logits, const std::vector<int>& qs) {
  std::vector<std::int64_t> t(qs.begin(), qs.end());
  auto target = torch::tensor(t, torch::kInt64).unsqueeze(1);
  return -torch::log_softmax(logits, 1).gather(1, target).mean();
}

}  // namespace

RotationLoss rotation_loss(const torch::Tensor& image, const RotationTarget& target, int q,
                           const det::ParamGroup& feature, const det::ParamGroup& rotation,
                           const det::DetectorConfig& cfg) {
  const auto rotated = rotate_tensor(image, q);
  const auto fmap = det::extract_features(rotated, feature, cfg);
  const auto crop = pseudoboxcrop(fmap, target.box, q, cfg.pool_size);
  RotationLoss out;
  out.q = q;
  out.crop_fallback = crop.fallback;
  out.loss = cross_entropy(rotation_logits(crop.patch, rotation), {q});
  if (!std::isfinite(out.loss.detach().item<double>())) {
    throw TrainingFault("non-finite rotation loss");
  }
  return out;
}

RotationLoss rotation_loss(const torch::Tensor& image, const RotationTarget& target, Rng& rng,
                           const det::ParamGroup& feature, const det::ParamGroup& rotation,
                           const det::DetectorConfig& cfg) {
  return rotation_loss(image, target, uniform_int(rng, 0, kNumRotations - 1), feature, rotation,
                       cfg);
}

torch::Tensor rotation_loss_batch(const std::vector<torch::Tensor>& images,
                                  const std::vector<RotationTarget>& targets,
                                  const std::vector<int>& qs, const det::ParamGroup& feature,
                                  const det::ParamGroup& rotation, const det::DetectorConfig& cfg) {
  std::vector<torch::Tensor> rotated;
  for (std::size_t i = 0; i < images.size(); ++i) rotated.push_back(rotate_tensor(images[i], qs[i]));
  const bool same_size = std::all_of(rotated.begin(), rotated.end(), [&](const torch::Tensor& t) {
    return t.sizes().equals(rotated.front().sizes());
  });
  if (!same_size) {
    auto total = torch::zeros({}, images.front().options());
    for (std::size_t i = 0; i < images.size(); ++i) {
      total = total + rotation_loss(images[i], targets[i], qs[i], feature, rotation, cfg).loss;
    }
    return total / static_cast<double>(images.size());
  }
  const auto maps = det::backbone(torch::stack(rotated), feature, cfg);
  std::vector<torch::Tensor> patches;
  for (std::size_t i = 0; i < images.size(); ++i) {
    const auto fmap = det::feature_map_of(maps, static_cast<int>(i),
                                          static_cast<int>(rotated[i].size(2)),
                                          static_cast<int>(rotated[i].size(1)), cfg);
    patches.push_back(pseudoboxcrop(fmap, targets[i].box, qs[i], cfg.pool_size).patch);
  }
  auto loss = cross_entropy(rotation_logits(torch::stack(patches), rotation), qs);
  if (!std::isfinite(loss.detach().item<double>())) {
    throw TrainingFault("non-finite rotation loss");
  }
  return loss;
}

double rotation_loss_all(const torch::Tensor& image, const RotationTarget& target,
                         const det::ParamGroup& feature, const det::ParamGroup& rotation,
                         const det::DetectorConfig& cfg) {
  torch::NoGradGuard no_grad;
  std::vector<torch::Tensor> images(kNumRotations, image);
  std::vector<RotationTarget> targets(kNumRotations, target);
  return rotation_loss_batch(images, targets, {0, 1, 2, 3}, feature, rotation, cfg).item<double>();
}

double rotation_accuracy(const std::vector<torch::Tensor>& images, const std::vector<Box>& boxes,
                         const det::ParamGroup& feature, const det::ParamGroup& rotation,
                         const det::DetectorConfig& cfg) {
  torch::NoGradGuard no_grad;
  int correct = 0, total = 0;
  for (std::size_t i = 0; i < images.size(); ++i) {
    std::vector<torch::Tensor> rotated;
    for (int q = 0; q < kNumRotations; ++q) rotated.push_back(rotate_tensor(images[i], q));
    const auto maps = det::backbone(torch::stack(rotated), feature, cfg);
    std::vector<torch::Tensor> patches;
    for (int q = 0; q < kNumRotations; ++q) {
      const auto fmap = det::feature_map_of(maps, q, static_cast<int>(rotated[q].size(2)),
                                            static_cast<int>(rotated[q].size(1)), cfg);
      patches.push_back(pseudoboxcrop(fmap, boxes[i], q, cfg.pool_size).patch);
    }
    const auto pred = rotation_logits(torch::stack(patches), rotation).argmax(1);
    for (int q = 0; q < kNumRotations; ++q) {
      correct += pred[q].item<std::int64_t>() == q ? 1 : 0;
      ++total;
    }
  }
  return total ? static_cast<double>(correct) / total : 0.0;
}

}  // namespace oshot::rot
