#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "oshot/detcore/detector.h"
#include "oshot/rotself/rotation.h"
#include "oshot/synthgen/image.h"
#include "oshot/train/checkpoint.h"

namespace oshot::adapt {

struct AdaptConfig {
  // Adaptation iterations; 0 is plain inference.
  int gamma = 5;
  double inner_lr = 1e-3;
  std::uint64_t seed = 0;
  // Also record the four-rotation mean L_r before and after adaptation.
  bool measure_rotation = false;

  void validate() const;
};

struct AdaptTrace {
  std::vector<double> rotation_loss;  // one per iteration
  std::vector<Box> boxes;             // pseudo box per iteration
  std::vector<rot::BoxSource> sources;
  std::vector<int> qs;
  bool fault = false;
  std::string fault_message;
  // Four-rotation mean L_r on the first iteration's box, with the initial and
  // the adapted parameters (NaN unless measured).
  double initial_rotation_loss = 0.0;
  double final_rotation_loss = 0.0;
  double seconds = 0.0;
};

struct Adapted {
  det::ParamGroup feature;
  det::ParamGroup rotation;
  AdaptTrace trace;
};

// Called after each completed iteration (and once with 0 before the first)
// with the current adapted feature parameters.
using StepObserver = std::function<void(int step, const det::ParamGroup& feature)>;

// One-shot adaptation on a single target image. Reads only the image and the
// checkpoint; theta_d is never written.
Adapted adapt_one(const synth::Image& img, const train::Checkpoint& ckpt, const AdaptConfig& cfg,
                  const StepObserver& observer = {});

// Detection with the adapted features and the checkpoint's theta_d.
std::vector<det::Detection> predict(const synth::Image& img, const det::ParamGroup& feature,
                                    const train::Checkpoint& ckpt);

struct ImageResult {
  std::string image_id;
  std::vector<det::Detection> detections;
  AdaptTrace trace;
};

// Per-image seed for the rotation draws: depends on the root seed and the
// image id only, so results do not depend on order or scheduling.
std::uint64_t image_seed(std::uint64_t root, const std::string& image_id);

// Each image starts from the original checkpoint. `threads` > 1 processes
// images concurrently; results are in input order.
std::vector<ImageResult> adapt_batch(const std::vector<synth::AnnotatedImage>& targets,
                                     const train::Checkpoint& ckpt, const AdaptConfig& cfg,
                                     int threads = 1);

}  // namespace oshot::adapt
