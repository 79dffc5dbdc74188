#pragma once

#include <cstdint>
#include <string>

#include "oshot/common/config.h"

namespace oshot::train {

enum class Variant { kBaseline, kTranBaseline, kOshot, kTranOshot, kMetaOshot, kFullOshot };
enum class MetaGradMode { kExact, kFirstOrder };

std::string to_string(Variant v);
Variant variant_from_string(const std::string& s);
std::string to_string(MetaGradMode m);

struct TrainConfig {
  Variant variant = Variant::kOshot;
  // Rotation loss weight.
  double lambda = 0.05;
  // Augmentations per meta sample.
  int K = 4;
  // Inner iterations per augmented copy.
  int eta = 5;
  // Inner (rotation) step size.
  double inner_lr = 1e-3;
  // Outer step size of meta-pretraining.
  double outer_lr = 1e-4;
  // Step size of multi-task pretraining.
  double lr = 1e-3;
  // "adam" or "sgd" (momentum 0.9) for the persistent parameters; inner
  // steps are always plain gradient steps.
  std::string optimizer = "adam";
  int epochs = 10;
  int batch_size = 8;
  // Caps the number of source images per meta epoch; 0 means all.
  int meta_images = 0;
  std::uint64_t seed = 0;
  MetaGradMode meta_grad_mode = MetaGradMode::kExact;

  bool trains_rotation() const;
  bool uses_augmentation() const;
  bool is_meta() const;
  // meta-oshot runs a single identity episode; other variants use K.
  int effective_k() const;

  // Throws ConfigError listing every violated constraint.
  void validate() const;
  void write(KeyValueConfig& cfg) const;
  static TrainConfig read(const KeyValueConfig& cfg);
};

}  // namespace oshot::train
