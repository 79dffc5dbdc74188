#include "oshot/adapt/adapt.h"

#include <atomic>
#include <chrono>
#include <cmath>
#include <limits>
#include <thread>

#include "oshot/common/errors.h"
#include "oshot/common/rng.h"

namespace oshot::adapt {

void AdaptConfig::validate() const {
  if (gamma < 0) throw ConfigError("gamma must be >= 0, got " + std::to_string(gamma));
  if (!(inner_lr > 0.0)) throw ConfigError("adapt inner_lr must be > 0");
}

Adapted adapt_one(const synth::Image& img, const train::Checkpoint& ckpt, const AdaptConfig& cfg,
                  const StepObserver& observer) {
  cfg.validate();
  if (cfg.gamma > 0 && !ckpt.trained(train::kRotationGroup)) {
    throw ConfigError("adaptation with gamma > 0 needs a trained rotation head; checkpoint variant " +
                      train::to_string(ckpt.config.variant) + " has none");
  }
  const auto start = std::chrono::steady_clock::now();
  const auto& detector = ckpt.detector;
  const auto& theta_d = ckpt.params.detection;
  const auto x = det::to_tensor(img, detector.dtype);
  auto rng = make_rng(cfg.seed, "rotation-draw");

  Adapted out;
  out.feature = ckpt.params.feature.clone(true);
  out.rotation = ckpt.params.rotation.clone(true);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  out.trace.initial_rotation_loss = nan;
  out.trace.final_rotation_loss = nan;
  if (observer) observer(0, out.feature);

  std::vector<torch::Tensor> params = out.feature.tensors();
  for (const auto& t : out.rotation.tensors()) params.push_back(t);
  try {
    for (int step = 0; step < cfg.gamma; ++step) {
      const auto target = rot::pseudo_target(x, out.feature, theta_d, detector);
      if (step == 0 && cfg.measure_rotation) {
        out.trace.initial_rotation_loss =
            rot::rotation_loss_all(x, target, out.feature, out.rotation, detector);
      }
      const int q = uniform_int(rng, 0, rot::kNumRotations - 1);
      const auto lr = rot::rotation_loss(x, target, q, out.feature, out.rotation, detector);
      const auto grads = torch::autograd::grad({lr.loss}, params, {}, false, false, true);
      {
        torch::NoGradGuard no_grad;
        for (std::size_t i = 0; i < params.size(); ++i) {
          if (grads[i].defined()) params[i].sub_(cfg.inner_lr * grads[i]);
        }
      }
      out.trace.rotation_loss.push_back(lr.loss.item<double>());
      out.trace.boxes.push_back(target.box);
      out.trace.sources.push_back(target.source);
      out.trace.qs.push_back(q);
      if (observer) observer(step + 1, out.feature);
    }
    for (const auto& p : params) {
      if (!p.isfinite().all().item<bool>()) throw TrainingFault("non-finite adapted parameters");
    }
    if (cfg.measure_rotation && cfg.gamma > 0) {
      const rot::RotationTarget first{out.trace.boxes.front(), out.trace.sources.front()};
      out.trace.final_rotation_loss =
          rot::rotation_loss_all(x, first, out.feature, out.rotation, detector);
    }
  } catch (const TrainingFault& e) {
    out.feature = ckpt.params.feature.clone(false);
    out.rotation = ckpt.params.rotation.clone(false);
    out.trace.fault = true;
    out.trace.fault_message = e.what();
  }
  out.trace.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

std::vector<det::Detection> predict(const synth::Image& img, const det::ParamGroup& feature,
                                    const train::Checkpoint& ckpt) {
  const auto& detector = ckpt.detector;
  return det::detect(det::to_tensor(img, detector.dtype), feature, ckpt.params.detection, detector,
                     detector.eval_score_threshold);
}

std::uint64_t image_seed(std::uint64_t root, const std::string& image_id) {
  return derive_seed(root, "adapt:" + image_id);
}

std::vector<ImageResult> adapt_batch(const std::vector<synth::AnnotatedImage>& targets,
                                     const train::Checkpoint& ckpt, const AdaptConfig& cfg,
                                     int threads) {
  cfg.validate();
  std::vector<ImageResult> out(targets.size());
  auto work = [&](std::size_t i) {
    auto local = cfg;
    local.seed = image_seed(cfg.seed, targets[i].id);
    auto adapted = adapt_one(targets[i].image, ckpt, local);
    out[i].image_id = targets[i].id;
    out[i].detections = predict(targets[i].image, adapted.feature, ckpt);
    out[i].trace = std::move(adapted.trace);
  };
  if (threads <= 1 || targets.size() < 2) {
    for (std::size_t i = 0; i < targets.size(); ++i) work(i);
    return out;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  {
    std::vector<std::jthread> pool;
    for (int t = 0; t < threads; ++t) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < targets.size(); i = next++) {
          try {
            work(i);
          } catch (...) {
            std::lock_guard lock(failure_mu);
            if (!failure) failure = std::current_exception();
          }
        }
      });
    }
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

}  // namespace oshot::adapt
