#include <gtest/gtest.h>

#include <algorithm>

#include "oshot/adapt/adapt.h"
#include "oshot/common/errors.h"
#include "../support/toy.h"

using namespace oshot;
using namespace oshot::adapt;

namespace {

train::Checkpoint toy_checkpoint(bool rotation_trained = true) {
  train::Checkpoint c;
  c.detector = toy::toy_detector(false);
  c.detector.pseudo_score_threshold = 0.3;
  c.params = toy::random_params(c.detector, 11);
  c.trained_groups = {train::kFeatureGroup, train::kDetectionGroup};
  if (rotation_trained) c.trained_groups.push_back(train::kRotationGroup);
  c.config.variant = rotation_trained ? train::Variant::kOshot : train::Variant::kBaseline;
  return c;
}

std::vector<synth::AnnotatedImage> targets(int n) {
  std::vector<synth::AnnotatedImage> v;
  for (int i = 0; i < n; ++i) v.push_back(toy::toy_image(50 + static_cast<std::uint64_t>(i)));
  return v;
}

}  // namespace

TEST(AdaptOne, ZeroGammaReturnsCheckpointParameters) {
  const auto ck = toy_checkpoint();
  AdaptConfig cfg;
  cfg.gamma = 0;
  const auto img = toy::toy_image(1);
  const auto r = adapt_one(img.image, ck, cfg);
  EXPECT_TRUE(r.feature.identical(ck.params.feature));
  EXPECT_TRUE(r.rotation.identical(ck.params.rotation));
  EXPECT_TRUE(r.trace.rotation_loss.empty());
  EXPECT_EQ(predict(img.image, r.feature, ck),
            det::detect(det::to_tensor(img.image, ck.detector.dtype), ck.params.feature,
                        ck.params.detection, ck.detector, ck.detector.eval_score_threshold));
}

TEST(AdaptOne, FiveStepsTouchOnlyCopies) {
  const auto ck = toy_checkpoint();
  const auto theta_d = ck.params.detection.clone(false);
  const auto theta_f = ck.params.feature.clone(false);
  AdaptConfig cfg;
  cfg.gamma = 5;
  cfg.inner_lr = 0.05;
  cfg.measure_rotation = true;
  const auto r = adapt_one(toy::toy_image(2).image, ck, cfg);
  EXPECT_EQ(r.trace.rotation_loss.size(), 5u);
  EXPECT_EQ(r.trace.boxes.size(), 5u);
  EXPECT_EQ(r.trace.qs.size(), 5u);
  EXPECT_FALSE(r.trace.fault);
  EXPECT_TRUE(ck.params.detection.identical(theta_d));
  EXPECT_TRUE(ck.params.feature.identical(theta_f));
  EXPECT_FALSE(r.feature.identical(theta_f));
  EXPECT_FALSE(std::isnan(r.trace.initial_rotation_loss));
  EXPECT_FALSE(std::isnan(r.trace.final_rotation_loss));
  for (int q : r.trace.qs) EXPECT_TRUE(q >= 0 && q < 4);
}

TEST(AdaptOne, NonFiniteStepReturnsUnadaptedCopyWithFault) {
  const auto ck = toy_checkpoint();
  AdaptConfig cfg;
  cfg.gamma = 5;
  cfg.inner_lr = 1e300;
  const auto r = adapt_one(toy::toy_image(3).image, ck, cfg);
  EXPECT_TRUE(r.trace.fault);
  EXPECT_FALSE(r.trace.fault_message.empty());
  EXPECT_TRUE(r.feature.identical(ck.params.feature));
}

TEST(AdaptOne, RejectsUntrainedRotationHead) {
  const auto ck = toy_checkpoint(false);
  AdaptConfig cfg;
  EXPECT_THROW(adapt_one(toy::toy_image(3).image, ck, cfg), ConfigError);
  cfg.gamma = 0;
  EXPECT_NO_THROW(adapt_one(toy::toy_image(3).image, ck, cfg));
  cfg.gamma = -1;
  EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(AdaptBatch, OrderAndConcurrencyIndependent) {
  const auto ck = toy_checkpoint();
  AdaptConfig cfg;
  cfg.gamma = 3;
  cfg.inner_lr = 0.05;
  auto data = targets(6);
  const auto seq = adapt_batch(data, ck, cfg, 1);
  const auto par = adapt_batch(data, ck, cfg, 3);
  auto perm = data;
  std::reverse(perm.begin(), perm.end());
  const auto rev = adapt_batch(perm, ck, cfg, 1);
  for (std::size_t i = 0; i < data.size(); ++i) {
    EXPECT_EQ(seq[i].image_id, data[i].id);
    EXPECT_EQ(seq[i].detections, par[i].detections);
    EXPECT_EQ(seq[i].trace.rotation_loss, par[i].trace.rotation_loss);
    const auto& r = rev[data.size() - 1 - i];
    EXPECT_EQ(r.image_id, seq[i].image_id);
    EXPECT_EQ(r.detections, seq[i].detections);
    EXPECT_EQ(r.trace.qs, seq[i].trace.qs);
  }
}

TEST(AdaptBatch, ImagesAreIsolated) {
  const auto ck = toy_checkpoint();
  AdaptConfig cfg;
  cfg.gamma = 3;
  cfg.inner_lr = 0.05;
  const auto data = targets(3);
  const auto all = adapt_batch(data, ck, cfg);
  const auto alone = adapt_batch({data[2]}, ck, cfg);
  EXPECT_EQ(all[2].detections, alone[0].detections);
}
