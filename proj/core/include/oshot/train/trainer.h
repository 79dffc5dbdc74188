#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "oshot/common/errors.h"
#include "oshot/synthgen/image.h"
#include "oshot/train/checkpoint.h"
#include "oshot/train/meta.h"

namespace oshot::train {

using Dataset = std::vector<synth::AnnotatedImage>;

struct TrainHooks {
  // Source validation split; evaluated for mAP every `eval_every` epochs and
  // after the last one (0: last only).
  const Dataset* validation = nullptr;
  int eval_every = 0;
  std::function<void(const MetricRow&)> on_epoch;
};

// Training diverged. Carries the parameters as of the last completed epoch.
class DivergenceError : public TrainingFault {
 public:
  DivergenceError(const std::string& what, std::shared_ptr<Checkpoint> last_good)
      : TrainingFault(what), last_good_(std::move(last_good)) {}
  const Checkpoint* last_good() const { return last_good_.get(); }

 private:
  std::shared_ptr<Checkpoint> last_good_;
};

// Joint minimization of L_d + lambda * L_r over (theta_f, theta_d, theta_r).
// Baseline variants drop the rotation term and leave theta_r at its
// initialization; tran-* variants augment each training image. The rotation
// branch crops ground-truth boxes: one instance and one rotation per image
// per step.
Checkpoint pretrain_multitask(const Dataset& source, const TrainConfig& cfg,
                              const det::DetectorConfig& detector, const TrainHooks& hooks = {});

// Meta-learning stage warm-started from `init`: for each source image, K
// augmented episodes of eta inner rotation steps on pseudo-box crops, then an
// outer step on (theta_f, theta_d) with the mean detection loss at the
// adapted features. Persistent theta_r stays frozen.
Checkpoint meta_pretrain(const Dataset& source, const TrainConfig& cfg, const Checkpoint& init,
                         const TrainHooks& hooks = {});

}  // namespace oshot::train
