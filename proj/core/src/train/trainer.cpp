#include "oshot/train/trainer.h"

#include <cmath>
#include <limits>
#include <numeric>

#include "oshot/common/rng.h"
#include "oshot/detcore/detector.h"
#include "oshot/evalkit/evaluate.h"
#include "oshot/rotself/rotation.h"
#include "oshot/synthgen/augment.h"

namespace oshot::train {

namespace {

std::unique_ptr<torch::optim::Optimizer> make_optimizer(const std::string& kind,
                                                        std::vector<torch::Tensor> params,
                                                        double lr) {
  if (kind == "sgd") {
    return std::make_unique<torch::optim::SGD>(std::move(params),
                                               torch::optim::SGDOptions(lr).momentum(0.9));
  }
  return std::make_unique<torch::optim::Adam>(std::move(params), torch::optim::AdamOptions(lr));
}

std::vector<std::size_t> shuffled(std::size_t n, Rng& rng) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t i = n; i > 1; --i) {
    std::swap(order[i - 1], order[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(i - 1)))]);
  }
  return order;
}

Checkpoint snapshot(const det::ModelParams& p, const det::DetectorConfig& detector,
                    const TrainConfig& cfg, int epoch, const std::vector<MetricRow>& rows,
                    std::vector<std::string> groups) {
  Checkpoint c;
  c.params = p.clone(false);
  c.detector = detector;
  c.config = cfg;
  c.epoch = epoch;
  c.metrics = rows;
  c.trained_groups = std::move(groups);
  return c;
}

bool evaluate_now(const TrainHooks& hooks, int epoch, int epochs) {
  if (!hooks.validation || hooks.validation->empty()) return false;
  if (epoch == epochs) return true;
  return hooks.eval_every > 0 && epoch % hooks.eval_every == 0;
}

double validation_map(const TrainHooks& hooks, const det::ModelParams& p,
                      const det::DetectorConfig& detector) {
  torch::NoGradGuard no_grad;
  return eval::dataset_map(*hooks.validation, p.feature, p.detection, detector);
}

}  // namespace

Checkpoint pretrain_multitask(const Dataset& source, const TrainConfig& cfg,
                              const det::DetectorConfig& detector, const TrainHooks& hooks) {
  cfg.validate();
  detector.validate();
  if (cfg.is_meta()) throw ConfigError("pretrain_multitask: meta variant " + to_string(cfg.variant));
  if (source.empty()) throw MissingInput("pretrain_multitask: empty source dataset");

  auto params = det::init_params(detector, cfg.seed).clone(true);
  std::vector<std::string> groups{kFeatureGroup, kDetectionGroup};
  std::vector<torch::Tensor> trainable = params.feature.tensors();
  for (const auto& t : params.detection.tensors()) trainable.push_back(t);
  const bool rotation = cfg.trains_rotation();
  if (rotation) {
    groups.push_back(kRotationGroup);
    for (const auto& t : params.rotation.tensors()) trainable.push_back(t);
  }
  auto opt = make_optimizer(cfg.optimizer, trainable, cfg.lr);
  const auto& catalogue = synth::augment_catalogue();

  std::vector<MetricRow> rows;
  auto last_good = std::make_shared<Checkpoint>(snapshot(params, detector, cfg, 0, rows, groups));
  const auto batch = static_cast<std::size_t>(cfg.batch_size);

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    auto data_rng = make_rng(cfg.seed, "data", static_cast<std::uint64_t>(epoch));
    auto aug_rng = make_rng(cfg.seed, "augmentation", static_cast<std::uint64_t>(epoch));
    auto rot_rng = make_rng(cfg.seed, "rotation-draw", static_cast<std::uint64_t>(epoch));
    const auto order = shuffled(source.size(), data_rng);
    double sum_d = 0.0, sum_r = 0.0;
    int steps = 0;
    try {
      for (std::size_t start = 0; start < order.size(); start += batch) {
        const auto end = std::min(order.size(), start + batch);
        std::vector<torch::Tensor> images;
        std::vector<const std::vector<BoxLabel>*> labels;
        for (std::size_t i = start; i < end; ++i) {
          const auto& item = source[order[i]];
          if (cfg.uses_augmentation()) {
            const auto kind = catalogue[static_cast<std::size_t>(
                uniform_int(aug_rng, 0, static_cast<int>(catalogue.size()) - 1))];
            images.push_back(det::to_tensor(synth::augment(item.image, kind, aug_rng()), detector.dtype));
          } else {
            images.push_back(det::to_tensor(item.image, detector.dtype));
          }
          labels.push_back(&item.labels);
        }

        opt->zero_grad();
        const auto maps = det::backbone(torch::stack(images), params.feature, detector);
        auto loss_d = torch::zeros({}, maps.options());
        for (std::size_t i = 0; i < images.size(); ++i) {
          const auto fmap = det::feature_map_of(maps, static_cast<int>(i),
                                                static_cast<int>(images[i].size(2)),
                                                static_cast<int>(images[i].size(1)), detector);
          loss_d = loss_d + det::detection_loss(fmap, *labels[i], params.detection, detector).total();
        }
        loss_d = loss_d / static_cast<double>(images.size());
        auto total = loss_d;
        double loss_r_value = std::numeric_limits<double>::quiet_NaN();
        if (rotation) {
          std::vector<rot::RotationTarget> targets;
          std::vector<int> qs;
          for (std::size_t i = 0; i < images.size(); ++i) {
            const auto& l = *labels[i];
            if (l.empty()) {
              targets.push_back({Box{0.0, 0.0, static_cast<double>(images[i].size(2)),
                                     static_cast<double>(images[i].size(1))},
                                 rot::BoxSource::kFullImageFallback});
            } else {
              const auto pick = uniform_int(rot_rng, 0, static_cast<int>(l.size()) - 1);
              targets.push_back({l[static_cast<std::size_t>(pick)].box, rot::BoxSource::kGroundTruth});
            }
            qs.push_back(uniform_int(rot_rng, 0, rot::kNumRotations - 1));
          }
          const auto loss_r =
              rot::rotation_loss_batch(images, targets, qs, params.feature, params.rotation, detector);
          loss_r_value = loss_r.item<double>();
          total = total + cfg.lambda * loss_r;
        }
        const double value = total.item<double>();
        if (!std::isfinite(value)) throw TrainingFault("non-finite training loss");
        total.backward();
        opt->step();
        for (const auto& t : trainable) {
          if (!t.isfinite().all().item<bool>()) throw TrainingFault("non-finite parameters after update");
        }
        sum_d += loss_d.item<double>();
        sum_r += loss_r_value;
        ++steps;
      }
    } catch (const TrainingFault& e) {
      throw DivergenceError(std::string(e.what()) + " at epoch " + std::to_string(epoch), last_good);
    }

    MetricRow row;
    row.epoch = epoch;
    row.split = "source-train";
    row.detection_loss = sum_d / steps;
    row.rotation_loss = rotation ? sum_r / steps : std::numeric_limits<double>::quiet_NaN();
    row.map = evaluate_now(hooks, epoch, cfg.epochs) ? validation_map(hooks, params, detector)
                                                     : std::numeric_limits<double>::quiet_NaN();
    rows.push_back(row);
    if (hooks.on_epoch) hooks.on_epoch(row);
    last_good = std::make_shared<Checkpoint>(snapshot(params, detector, cfg, epoch, rows, groups));
  }
  return *last_good;
}

Checkpoint meta_pretrain(const Dataset& source, const TrainConfig& cfg, const Checkpoint& init,
                         const TrainHooks& hooks) {
  cfg.validate();
  if (!cfg.is_meta()) throw ConfigError("meta_pretrain: variant " + to_string(cfg.variant) + " is not a meta variant");
  if (source.empty()) throw MissingInput("meta_pretrain: empty source dataset");
  const auto& detector = init.detector;

  auto params = init.params.clone(true);
  // Persistent theta_r is frozen; inner copies train it transiently.
  params.rotation = init.params.rotation.clone(false);
  std::vector<torch::Tensor> trainable = params.feature.tensors();
  for (const auto& t : params.detection.tensors()) trainable.push_back(t);
  auto opt = make_optimizer(cfg.optimizer, trainable, cfg.outer_lr);

  MetaSettings settings;
  settings.K = cfg.effective_k();
  settings.eta = cfg.eta;
  settings.inner_lr = cfg.inner_lr;
  settings.mode = cfg.meta_grad_mode;
  settings.identity_only = cfg.variant == Variant::kMetaOshot;

  auto groups = init.trained_groups;
  std::vector<MetricRow> rows = init.metrics;
  const int base_epoch = init.epoch;
  auto last_good = std::make_shared<Checkpoint>(init);
  last_good->config = cfg;

  const std::size_t limit = cfg.meta_images > 0
                                ? std::min(source.size(), static_cast<std::size_t>(cfg.meta_images))
                                : source.size();
  const auto batch = static_cast<std::size_t>(cfg.batch_size);
  std::uint64_t episode_index = 0;

  for (int e = 1; e <= cfg.epochs; ++e) {
    const int epoch = base_epoch + e;
    auto data_rng = make_rng(cfg.seed, "meta-data", static_cast<std::uint64_t>(epoch));
    auto order = shuffled(source.size(), data_rng);
    order.resize(limit);
    double sum_d = 0.0, sum_r = 0.0;
    int n_d = 0, n_r = 0;
    try {
      for (std::size_t start = 0; start < order.size(); start += batch) {
        const auto end = std::min(order.size(), start + batch);
        const double scale = 1.0 / static_cast<double>(end - start);
        std::vector<torch::Tensor> acc;
        for (const auto& t : trainable) acc.push_back(torch::zeros_like(t));
        for (std::size_t i = start; i < end; ++i) {
          auto rng = make_rng(cfg.seed, "augmentation", episode_index++);
          MetaGradient g;
          try {
            g = meta_gradient(source[order[i]], params, detector, settings, rng);
          } catch (const c10::Error& err) {
            const std::string what = err.what();
            if (what.find("alloc") != std::string::npos || what.find("memory") != std::string::npos) {
              throw TrainingFault("out of memory in exact meta-gradient mode; set meta_grad_mode = first-order");
            }
            throw;
          } catch (const std::bad_alloc&) {
            throw TrainingFault("out of memory in meta-gradient computation; set meta_grad_mode = first-order");
          }
          std::size_t j = 0;
          for (const auto& t : g.feature) acc[j++].add_(t, scale);
          for (const auto& t : g.detection) acc[j++].add_(t, scale);
          sum_d += g.loss;
          ++n_d;
          for (const auto& ep : g.episodes) {
            for (const auto& s : ep.steps) {
              sum_r += s.rotation_loss;
              ++n_r;
            }
          }
        }
        for (std::size_t j = 0; j < trainable.size(); ++j) {
          if (!acc[j].isfinite().all().item<bool>()) throw TrainingFault("non-finite outer gradient");
          trainable[j].mutable_grad() = acc[j];
        }
        opt->step();
      }
    } catch (const TrainingFault& err) {
      throw DivergenceError(std::string(err.what()) + " at meta epoch " + std::to_string(e), last_good);
    }
    MetricRow row;
    row.epoch = epoch;
    row.split = "source-meta";
    row.detection_loss = n_d ? sum_d / n_d : std::numeric_limits<double>::quiet_NaN();
    row.rotation_loss = n_r ? sum_r / n_r : std::numeric_limits<double>::quiet_NaN();
    row.map = evaluate_now(hooks, e, cfg.epochs) ? validation_map(hooks, params, detector)
                                                 : std::numeric_limits<double>::quiet_NaN();
    rows.push_back(row);
    if (hooks.on_epoch) hooks.on_epoch(row);
    last_good = std::make_shared<Checkpoint>(snapshot(params, detector, cfg, epoch, rows, groups));
  }
  return *last_good;
}

}  // namespace oshot::train
