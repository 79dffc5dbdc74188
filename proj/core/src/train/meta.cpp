#include "oshot/train/meta.h"

#include <cmath>
#include <stdexcept>

#include "oshot/common/errors.h"
#include "oshot/detcore/detector.h"

namespace oshot::train {

namespace {

std::vector<torch::Tensor> grads_or_zero(const torch::Tensor& out,
                                         const std::vector<torch::Tensor>& inputs, bool keep_graph) {
  auto g = torch::autograd::grad({out}, inputs, {}, keep_graph, keep_graph, /*allow_unused=*/true);
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!g[i].defined()) g[i] = torch::zeros_like(inputs[i]);
  }
  return g;
}

std::vector<torch::Tensor> concat(const std::vector<torch::Tensor>& a,
                                  const std::vector<torch::Tensor>& b) {
  auto out = a;
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

}  // namespace

std::vector<synth::AugmentKind> draw_augmentations(int K, bool identity_only, Rng& rng) {
  if (identity_only) return std::vector<synth::AugmentKind>(static_cast<std::size_t>(K), synth::AugmentKind::kIdentity);
  auto pool = synth::augment_catalogue();
  if (K > static_cast<int>(pool.size())) {
    throw ConfigError("K = " + std::to_string(K) + " exceeds the " + std::to_string(pool.size()) +
                      " available augmentation kinds");
  }
  std::vector<synth::AugmentKind> out;
  for (int k = 0; k < K; ++k) {
    const auto pick = static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(pool.size()) - 1));
    out.push_back(pool[pick]);
    pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(pick));
  }
  return out;
}

MetaGradient meta_gradient(const synth::AnnotatedImage& image, const det::ModelParams& params,
                           const det::DetectorConfig& detector, const MetaSettings& settings,
                           Rng& rng, const std::vector<Episode>* replay) {
  if (settings.K < 1) throw ConfigError("K must be >= 1");
  if (settings.eta < 0) throw ConfigError("eta must be >= 0");
  if (replay && static_cast<int>(replay->size()) != settings.K) {
    throw std::invalid_argument("meta_gradient: replay has " + std::to_string(replay->size()) +
                                " episodes, expected K = " + std::to_string(settings.K));
  }
  const bool exact = settings.mode == MetaGradMode::kExact;
  // Private leaves: gradients w.r.t. these equal those w.r.t. the persistent
  // parameters, which are never touched.
  const auto base = params.clone(true);
  const auto& theta_f = base.feature.tensors();
  const auto& theta_d = base.detection.tensors();
  const std::size_t nf = theta_f.size();

  std::vector<synth::AugmentKind> kinds;
  if (!replay) kinds = draw_augmentations(settings.K, settings.identity_only, rng);

  MetaGradient out;
  for (const auto& t : theta_f) out.feature.push_back(torch::zeros_like(t));
  for (const auto& t : theta_d) out.detection.push_back(torch::zeros_like(t));
  const double inv_k = 1.0 / settings.K;

  for (int k = 0; k < settings.K; ++k) {
    Episode ep;
    const Episode* rep = replay ? &(*replay)[static_cast<std::size_t>(k)] : nullptr;
    if (rep) {
      if (static_cast<int>(rep->steps.size()) != settings.eta) {
        throw std::invalid_argument("meta_gradient: replay episode length differs from eta");
      }
      ep.kind = rep->kind;
      ep.augment_seed = rep->augment_seed;
    } else {
      ep.kind = kinds[static_cast<std::size_t>(k)];
      ep.augment_seed = rng();
    }
    const auto x = det::to_tensor(synth::augment(image.image, ep.kind, ep.augment_seed), detector.dtype);

    // Copy params.
    std::vector<torch::Tensor> f;
    if (exact) {
      f = theta_f;
    } else {
      for (const auto& t : theta_f) f.push_back(t.detach().clone().requires_grad_(true));
    }
    std::vector<torch::Tensor> r;
    for (const auto& t : base.rotation.tensors()) r.push_back(t.detach().clone().requires_grad_(true));

    for (int t = 0; t < settings.eta; ++t) {
      const auto fg = base.feature.with_values(f);
      const auto rg = base.rotation.with_values(r);
      InnerStep step;
      rot::RotationTarget target;
      if (rep) {
        const auto& rs = rep->steps[static_cast<std::size_t>(t)];
        target = {rs.box, rs.source};
        step.q = rs.q;
      } else {
        target = rot::pseudo_target(x, fg, base.detection, detector);
        step.q = uniform_int(rng, 0, rot::kNumRotations - 1);
      }
      step.box = target.box;
      step.source = target.source;
      const auto lr = rot::rotation_loss(x, target, step.q, fg, rg, detector);
      step.rotation_loss = lr.loss.item<double>();
      const auto g = grads_or_zero(lr.loss, concat(f, r), exact);
      for (std::size_t i = 0; i < f.size(); ++i) {
        f[i] = f[i] - settings.inner_lr * g[i];
        if (!exact) f[i] = f[i].detach().requires_grad_(true);
      }
      for (std::size_t i = 0; i < r.size(); ++i) {
        r[i] = r[i] - settings.inner_lr * g[nf + i];
        if (!exact) r[i] = r[i].detach().requires_grad_(true);
      }
      ep.steps.push_back(step);
    }

    const auto fg = base.feature.with_values(f);
    const auto dl = det::detection_loss(x, image.labels, fg, base.detection, detector,
                                        rep ? &rep->outer_proposals : nullptr);
    ep.outer_proposals = dl.proposals;
    const auto lk = dl.total();
    ep.outer_loss = lk.item<double>();
    if (!std::isfinite(ep.outer_loss)) throw TrainingFault("non-finite outer detection loss");
    // Exact: differentiate through the inner steps back to theta_f.
    // First-order: d/d theta'_f, applied to theta_f unchanged.
    const auto g = grads_or_zero(lk * inv_k, concat(exact ? theta_f : f, theta_d), false);
    for (std::size_t i = 0; i < nf; ++i) out.feature[i].add_(g[i]);
    for (std::size_t i = 0; i < theta_d.size(); ++i) out.detection[i].add_(g[nf + i]);
    out.loss += ep.outer_loss * inv_k;
    out.episodes.push_back(std::move(ep));
  }
  return out;
}

}  // namespace oshot::train
