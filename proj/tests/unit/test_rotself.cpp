#include <gtest/gtest.h>

#include <cmath>

#include "oshot/common/errors.h"
#include "oshot/detcore/detector.h"
#include "oshot/rotself/rotation.h"
#include "oshot/synthgen/image.h"
#include "oshot/synthgen/scene.h"
#include "../support/toy.h"

using namespace oshot;
using namespace oshot::rot;

namespace {

det::FeatureMap random_map(int c, int h, int w, int stride, std::uint64_t seed) {
  torch::manual_seed(seed);
  return {torch::randn({c, h, w}, torch::kFloat64), stride, w * stride, h * stride};
}

det::FeatureMap rotated(const det::FeatureMap& m, int q) {
  det::FeatureMap r{rotate_tensor(m.values, q), m.stride, m.source_width, m.source_height};
  if (q % 2) std::swap(r.source_width, r.source_height);
  return r;
}

}  // namespace

TEST(RotateTensor, MatchesImageRotation) {
  const auto img = synth::generate_scene({}, 2).image;
  const auto x = det::to_tensor(img, torch::kFloat32);
  for (int q = 0; q < 4; ++q) {
    EXPECT_TRUE(torch::equal(rotate_tensor(x, q), det::to_tensor(synth::rotate(img, q), torch::kFloat32))) << q;
  }
}

TEST(BoxCrop, FullImageIsWholeMapPool) {
  const auto m = random_map(3, 12, 12, 8, 1);
  const auto c = boxcrop(m, {0, 0, 96, 96}, 5);
  EXPECT_FALSE(c.fallback);
  EXPECT_LT((c.patch - torch::adaptive_avg_pool2d(m.values, {5, 5})).abs().max().item<double>(), 1e-12);
}

TEST(BoxCrop, DegenerateBoxFallsBack) {
  const auto m = random_map(3, 12, 12, 8, 1);
  const auto c = boxcrop(m, {200, 200, 220, 220}, 5);
  EXPECT_TRUE(c.fallback);
  EXPECT_LT((c.patch - torch::adaptive_avg_pool2d(m.values, {5, 5})).abs().max().item<double>(), 1e-12);
  const auto p = pseudoboxcrop(rotated(m, 1), {10, 10, 10, 20}, 1, 5);
  EXPECT_TRUE(p.fallback);
}

TEST(PseudoBoxCrop, IdentityRotationIsBoxCrop) {
  const auto m = random_map(4, 12, 12, 8, 3);
  const Box b{13, 20, 61, 77};
  EXPECT_TRUE(torch::equal(pseudoboxcrop(m, b, 0, 5).patch, boxcrop(m, b, 5).patch));
}

TEST(PseudoBoxCrop, CommutesWithRotation) {
  auto rng = make_rng(5, "commute");
  const auto m = random_map(4, 10, 14, 8, 4);  // non-square map: 112 x 80 image
  for (int t = 0; t < 50; ++t) {
    const int x1 = uniform_int(rng, 0, 100), y1 = uniform_int(rng, 0, 70);
    const Box b{double(x1), double(y1), double(uniform_int(rng, x1 + 1, 112)), double(uniform_int(rng, y1 + 1, 80))};
    const int q = uniform_int(rng, 0, 3);
    const auto lhs = pseudoboxcrop(rotated(m, q), b, q, 5).patch;
    const auto rhs = rotate_tensor(boxcrop(m, b, 5).patch, q);
    EXPECT_LT((lhs - rhs).abs().max().item<double>(), 1e-12) << b << " q=" << q;
  }
}

TEST(RotationLoss, UniformHeadGivesLog4) {
  det::DetectorConfig cfg;
  const auto p = det::init_params(cfg, 0);  // zero rotation head
  const auto img = synth::generate_scene({}, 3);
  const auto x = det::to_tensor(img.image, cfg.dtype);
  for (int q = 0; q < 4; ++q) {
    const auto l = rotation_loss(x, {img.labels[0].box, BoxSource::kGroundTruth}, q, p.feature, p.rotation, cfg);
    EXPECT_NEAR(l.loss.item<double>(), std::log(4.0), 1e-6);
    EXPECT_EQ(l.q, q);
  }
  EXPECT_NEAR(rotation_loss_all(x, {img.labels[0].box, BoxSource::kGroundTruth}, p.feature, p.rotation, cfg),
              std::log(4.0), 1e-6);
}

TEST(RotationLoss, NonNegativeAndRandomDrawIsSeeded) {
  const auto cfg = toy::toy_detector(false);
  const auto p = toy::random_params(cfg, 1, 1.0);
  const auto img = toy::toy_image(2);
  const auto x = det::to_tensor(img.image, cfg.dtype);
  auto r1 = make_rng(9, "rotation-draw");
  auto r2 = make_rng(9, "rotation-draw");
  for (int i = 0; i < 8; ++i) {
    const auto a = rotation_loss(x, {img.labels[0].box, BoxSource::kGroundTruth}, r1, p.feature, p.rotation, cfg);
    const auto b = rotation_loss(x, {img.labels[0].box, BoxSource::kGroundTruth}, r2, p.feature, p.rotation, cfg);
    EXPECT_EQ(a.q, b.q);
    EXPECT_GE(a.loss.item<double>(), 0.0);
  }
}

TEST(RotationLoss, BatchMatchesPerItemMean) {
  const auto cfg = toy::toy_detector(false);
  const auto p = toy::random_params(cfg, 2);
  std::vector<torch::Tensor> xs;
  std::vector<RotationTarget> ts;
  std::vector<int> qs;
  double sum = 0.0;
  for (int i = 0; i < 4; ++i) {
    const auto img = toy::toy_image(10 + i);
    xs.push_back(det::to_tensor(img.image, cfg.dtype));
    ts.push_back({img.labels[0].box, BoxSource::kGroundTruth});
    qs.push_back(i);
    sum += rotation_loss(xs.back(), ts.back(), i, p.feature, p.rotation, cfg).loss.item<double>();
  }
  EXPECT_NEAR(rotation_loss_batch(xs, ts, qs, p.feature, p.rotation, cfg).item<double>(), sum / 4, 1e-10);
}

TEST(RotationLoss, GradientMatchesFiniteDifferences) {
  const auto cfg = toy::toy_detector(false);
  const auto p = toy::random_params(cfg, 5);
  const auto img = toy::toy_image(6);
  const auto x = det::to_tensor(img.image, cfg.dtype);
  const RotationTarget target{img.labels[0].box, BoxSource::kGroundTruth};
  auto values = p.feature.tensors();
  values.push_back(p.rotation.at("rot.fc.weight"));
  const auto nf = p.feature.size();
  auto loss = [&](const std::vector<torch::Tensor>& v) {
    std::vector<torch::Tensor> f(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(nf));
    const auto r = p.rotation.with_values({v.back(), p.rotation.at("rot.fc.bias")});
    return rotation_loss(x, target, 3, p.feature.with_values(f), r, cfg).loss;
  };
  std::vector<torch::Tensor> leaves;
  for (const auto& t : values) leaves.push_back(t.detach().clone().requires_grad_(true));
  const auto g = torch::autograd::grad({loss(leaves)}, leaves);
  auto fv = [&](const std::vector<torch::Tensor>& v) { return loss(v).item<double>(); };
  EXPECT_LT(toy::rel_err(g[0], toy::central_difference(fv, values, 0)), 1e-4);
  EXPECT_LT(toy::rel_err(g.back(), toy::central_difference(fv, values, values.size() - 1)), 1e-4);
}

TEST(PseudoLabel, FallbackTargetIsFullImage) {
  det::DetectorConfig cfg;
  cfg.pseudo_score_threshold = 1.1;  // unreachable
  const auto p = det::init_params(cfg, 0);
  const auto img = synth::generate_scene({}, 3);
  const auto x = det::to_tensor(img.image, cfg.dtype);
  EXPECT_FALSE(pseudo_label(x, p.feature, p.detection, cfg).has_value());
  const auto t = pseudo_target(x, p.feature, p.detection, cfg);
  EXPECT_EQ(t.source, BoxSource::kFullImageFallback);
  EXPECT_EQ(t.box, (Box{0, 0, 96, 96}));
}

TEST(PseudoLabel, UntrainedModelRarelyConfident) {
  det::DetectorConfig cfg;
  const auto p = det::init_params(cfg, 0);
  int found = 0;
  for (std::uint64_t s = 0; s < 10; ++s) {
    const auto img = synth::generate_scene({}, s);
    found += pseudo_label(det::to_tensor(img.image, cfg.dtype), p.feature, p.detection, cfg).has_value();
  }
  EXPECT_LE(found, 2);
}
