#pragma once

#include <cstdint>
#include <vector>

#include <torch/torch.h>

#include "oshot/common/box.h"
#include "oshot/common/rng.h"
#include "oshot/detcore/params.h"
#include "oshot/rotself/rotation.h"
#include "oshot/synthgen/augment.h"
#include "oshot/train/config.h"

namespace oshot::train {

struct InnerStep {
  int q = 0;
  Box box;  // pseudo box in the unrotated frame
  rot::BoxSource source = rot::BoxSource::kPseudo;
  double rotation_loss = 0.0;
};

// Everything random or discrete in one augmented episode. Passing episodes
// back as a replay reproduces the same bi-level objective as a smooth
// function of the parameters.
struct Episode {
  synth::AugmentKind kind = synth::AugmentKind::kIdentity;
  std::uint64_t augment_seed = 0;
  std::vector<InnerStep> steps;
  std::vector<Box> outer_proposals;
  double outer_loss = 0.0;
};

struct MetaSettings {
  int K = 4;
  int eta = 5;
  double inner_lr = 1e-3;
  MetaGradMode mode = MetaGradMode::kExact;
  // Single identity episode (meta-oshot).
  bool identity_only = false;
};

struct MetaGradient {
  std::vector<torch::Tensor> feature;    // d/d theta_f of (1/K) sum_k l_k
  std::vector<torch::Tensor> detection;  // d/d theta_d
  double loss = 0.0;                     // (1/K) sum_k l_k
  std::vector<Episode> episodes;
};

// Draws K distinct augmentation kinds without replacement (identity only
// when `identity_only`).
std::vector<synth::AugmentKind> draw_augmentations(int K, bool identity_only, Rng& rng);

// Outer gradient for one source image. Persistent parameters are read, never
// modified. Exact mode differentiates through the inner updates; first-order
// mode treats the adapted theta_f as theta_f plus a constant.
MetaGradient meta_gradient(const synth::AnnotatedImage& image, const det::ModelParams& params,
                           const det::DetectorConfig& detector, const MetaSettings& settings,
                           Rng& rng, const std::vector<Episode>* replay = nullptr);

}  // namespace oshot::train
