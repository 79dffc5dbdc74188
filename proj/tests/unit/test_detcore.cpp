#include <gtest/gtest.h>

#include "oshot/common/errors.h"
#include "oshot/detcore/box.h"
#include "oshot/detcore/detector.h"
#include "oshot/detcore/params.h"
#include "oshot/detcore/pooling.h"
#include "oshot/synthgen/scene.h"
#include "../support/toy.h"

using namespace oshot;
using namespace oshot::det;

TEST(Iou, Examples) {
  const Box a{0, 0, 10, 10};
  EXPECT_DOUBLE_EQ(iou(a, a), 1.0);
  EXPECT_DOUBLE_EQ(iou(a, {20, 20, 30, 30}), 0.0);
  EXPECT_DOUBLE_EQ(iou(a, {10, 0, 20, 10}), 0.0);
  EXPECT_NEAR(iou(a, {5, 5, 15, 15}), 25.0 / 175.0, 1e-12);
  EXPECT_DOUBLE_EQ(iou({3, 3, 3, 3}, {3, 3, 3, 3}), 0.0);
}

TEST(Iou, MatchesPixelEnumeration) {
  auto rng = make_rng(2, "iou");
  for (int t = 0; t < 200; ++t) {
    auto draw = [&] {
      const int x1 = uniform_int(rng, 0, 18), y1 = uniform_int(rng, 0, 18);
      return Box{double(x1), double(y1), double(uniform_int(rng, x1 + 1, 20)), double(uniform_int(rng, y1 + 1, 20))};
    };
    const Box a = draw(), b = draw();
    int inter = 0, uni = 0;
    for (int y = 0; y < 20; ++y)
      for (int x = 0; x < 20; ++x) {
        const bool ia = x >= a.x1 && x < a.x2 && y >= a.y1 && y < a.y2;
        const bool ib = x >= b.x1 && x < b.x2 && y >= b.y1 && y < b.y2;
        inter += ia && ib;
        uni += ia || ib;
      }
    EXPECT_NEAR(iou(a, b), double(inter) / uni, 1e-12);
  }
}

TEST(Nms, SuppressesOverlapsStably) {
  const std::vector<Box> boxes{{0, 0, 10, 10}, {1, 1, 11, 11}, {20, 20, 30, 30}, {0, 0, 10, 10}};
  const std::vector<double> scores{0.5, 0.9, 0.7, 0.9};
  EXPECT_EQ(nms(boxes, scores, 0.5), (std::vector<int>{1, 2}));
  EXPECT_EQ(nms(boxes, scores, 1.0), (std::vector<int>{1, 3, 2, 0}));
  EXPECT_TRUE(nms({}, {}, 0.5).empty());
}

TEST(BoxCoding, RoundTrip) {
  const std::array<double, 4> w{10, 10, 5, 5};
  const Box ref{10, 20, 40, 60}, target{12, 18, 50, 70};
  const auto d = encode_box(target, ref, w);
  const auto back = decode_box(d, ref, w);
  EXPECT_NEAR(back.x1, target.x1, 1e-9);
  EXPECT_NEAR(back.y1, target.y1, 1e-9);
  EXPECT_NEAR(back.x2, target.x2, 1e-9);
  EXPECT_NEAR(back.y2, target.y2, 1e-9);
  const auto c = clip_box({-5, -5, 200, 30}, 96, 96);
  EXPECT_EQ(c, (Box{0, 0, 96, 30}));
}

TEST(Pooling, CellRanges) {
  EXPECT_EQ(*box_to_cells({16, 24, 48, 72}, 8, 12, 12), (CellRange{2, 3, 6, 9}));
  EXPECT_EQ(*box_to_cells({17, 25, 47, 71}, 8, 12, 12), (CellRange{2, 3, 6, 9}));
  EXPECT_EQ(*box_to_cells({-10, -10, 200, 200}, 8, 12, 12), (CellRange{0, 0, 12, 12}));
  EXPECT_FALSE(box_to_cells({100, 100, 120, 120}, 8, 12, 12).has_value());
}

TEST(Pooling, MatchesCellByCellOracle) {
  torch::manual_seed(0);
  const auto fmap = torch::randn({3, 12, 12}, torch::kFloat64);
  const CellRange r{2, 3, 6, 9};  // x in [2,6), y in [3,9)
  const int s = 5;
  const auto got = pool_cells(fmap, {r}, s)[0];
  const int W = r.x1 - r.x0, H = r.y1 - r.y0;
  double max_diff = 0.0;
  for (int c = 0; c < 3; ++c)
    for (int i = 0; i < s; ++i)
      for (int j = 0; j < s; ++j) {
        const int ys = r.y0 + (i * H) / s, ye = r.y0 + ((i + 1) * H + s - 1) / s;
        const int xs = r.x0 + (j * W) / s, xe = r.x0 + ((j + 1) * W + s - 1) / s;
        double sum = 0.0;
        for (int y = ys; y < ye; ++y)
          for (int x = xs; x < xe; ++x) sum += fmap[c][y][x].item<double>();
        max_diff = std::max(max_diff, std::abs(sum / ((ye - ys) * (xe - xs)) - got[c][i][j].item<double>()));
      }
  EXPECT_LT(max_diff, 1e-6);
  const auto ref = torch::adaptive_avg_pool2d(fmap.slice(1, 3, 9).slice(2, 2, 6), {s, s});
  EXPECT_LT((ref - got).abs().max().item<double>(), 1e-12);
}

TEST(Pooling, ConstantMapGivesConstantPatch) {
  const auto fmap = torch::full({2, 12, 12}, 0.75, torch::kFloat64);
  const auto got = pool_cells(fmap, {{1, 1, 4, 11}}, 5);
  EXPECT_LT((got - 0.75).abs().max().item<double>(), 1e-12);
}

class DetectorTest : public ::testing::Test {
 protected:
  DetectorConfig cfg;
  ModelParams params = init_params(cfg, 0);
  synth::AnnotatedImage img = synth::generate_scene({}, 1);
};

TEST_F(DetectorTest, BackboneShapeDeterminismAndFiniteness) {
  const auto x = to_tensor(img.image, cfg.dtype);
  const auto a = extract_features(x, params.feature, cfg);
  EXPECT_EQ(a.values.sizes(), (std::vector<std::int64_t>{cfg.feature_channels(), 12, 12}));
  EXPECT_EQ(a.stride, 8);
  const auto b = extract_features(x, params.feature, cfg);
  EXPECT_TRUE(torch::equal(a.values, b.values));
  const auto z = extract_features(torch::zeros_like(x), params.feature, cfg);
  EXPECT_TRUE(z.values.isfinite().all().item<bool>());
  EXPECT_THROW(backbone(torch::zeros({1, 3, 90, 96}), params.feature, cfg), std::invalid_argument);
}

TEST_F(DetectorTest, ProposalsBoundedAndClipped) {
  const auto fmap = extract_features(to_tensor(img.image, cfg.dtype), params.feature, cfg);
  EXPECT_EQ(make_anchors(12, 12, cfg).size(), 864u);
  for (auto mode : {Mode::kTrain, Mode::kEval}) {
    const auto props = propose_regions(fmap, params.detection, cfg, mode);
    EXPECT_LE(props.size(), static_cast<std::size_t>(mode == Mode::kTrain ? 64 : 32));
    EXPECT_FALSE(props.empty());
    for (const auto& p : props) {
      EXPECT_GE(p.box.x1, 0.0);
      EXPECT_GE(p.box.y1, 0.0);
      EXPECT_LE(p.box.x2, 96.0);
      EXPECT_LE(p.box.y2, 96.0);
      EXPECT_GE(p.objectness, 0.0);
      EXPECT_LE(p.objectness, 1.0);
    }
  }
}

TEST_F(DetectorTest, RoiPosteriorsNormalized) {
  const auto fmap = extract_features(to_tensor(img.image, cfg.dtype), params.feature, cfg);
  EXPECT_TRUE(roi_classify(fmap, {}, params.detection, cfg, 0.0).empty());
  const auto props = propose_regions(fmap, params.detection, cfg, Mode::kEval);
  std::vector<Box> boxes;
  for (const auto& p : props) boxes.push_back(p.box);
  const auto out = roi_forward(fmap, boxes, params.detection, cfg);
  const auto sums = torch::softmax(out.class_logits.to(torch::kFloat64), 1).sum(1);
  EXPECT_LT((sums - 1.0).abs().max().item<double>(), 1e-6);
}

TEST_F(DetectorTest, DetectIsDeterministic) {
  const auto x = to_tensor(img.image, cfg.dtype);
  const auto a = detect(x, params.feature, params.detection, cfg, 0.0);
  EXPECT_EQ(a, detect(x, params.feature, params.detection, cfg, 0.0));
  for (std::size_t i = 1; i < a.size(); ++i) EXPECT_GE(a[i - 1].score, a[i].score);
}

TEST_F(DetectorTest, LossWithoutLabelsHasNoBoxTerms) {
  const auto l = detection_loss(to_tensor(img.image, cfg.dtype), {}, params.feature, params.detection, cfg);
  EXPECT_EQ(l.rpn_box.item<double>(), 0.0);
  EXPECT_EQ(l.roi_box.item<double>(), 0.0);
  EXPECT_GT(l.rpn_objectness.item<double>(), 0.0);
  EXPECT_GT(l.roi_class.item<double>(), 0.0);
}

TEST_F(DetectorTest, LossNonNegative) {
  for (std::uint64_t s = 0; s < 100; ++s) {
    const auto image = synth::generate_scene({}, 100 + s);
    const auto p = s % 2 ? params : init_params(cfg, s);
    torch::NoGradGuard no_grad;
    const auto l = detection_loss(to_tensor(image.image, cfg.dtype), image.labels, p.feature, p.detection, cfg);
    EXPECT_GE(l.total().item<double>(), 0.0);
  }
}

TEST(DetectionLossGradient, MatchesFiniteDifferencesOnSlice) {
  // ReLU toy detector in 64-bit; proposals frozen so the loss is smooth
  // almost everywhere.
  const auto cfg = toy::toy_detector(false);
  const auto p = toy::random_params(cfg, 3);
  const auto img = toy::toy_image(4);
  const auto x = to_tensor(img.image, cfg.dtype);
  const auto proposals = detection_loss(x, img.labels, p.feature, p.detection, cfg).proposals;

  auto values = p.feature.tensors();
  for (const auto& t : p.detection.tensors()) values.push_back(t);
  const auto nf = p.feature.size();
  auto loss = [&](const std::vector<torch::Tensor>& v) {
    std::vector<torch::Tensor> f(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(nf));
    std::vector<torch::Tensor> d(v.begin() + static_cast<std::ptrdiff_t>(nf), v.end());
    return detection_loss(x, img.labels, p.feature.with_values(f), p.detection.with_values(d), cfg, &proposals).total();
  };
  std::vector<torch::Tensor> leaves;
  for (const auto& t : values) leaves.push_back(t.detach().clone().requires_grad_(true));
  const auto grads = torch::autograd::grad({loss(leaves)}, leaves);

  // 10 entries each from a backbone weight and the ROI classifier.
  for (const char* name : {"backbone.conv0.weight", "roi.cls.weight"}) {
    std::size_t which = 0;
    const auto& names = p.feature.contains(name) ? p.feature.names() : p.detection.names();
    for (std::size_t i = 0; i < names.size(); ++i)
      if (names[i] == name) which = p.feature.contains(name) ? i : nf + i;
    auto analytic = grads[which].flatten().slice(0, 0, 10);
    auto fd = torch::zeros_like(analytic);
    for (int i = 0; i < 10; ++i) {
      auto v = values;
      auto flat = v[which].flatten().clone();
      const double h = 1e-6;
      flat[i] += h;
      v[which] = flat.view_as(values[which]);
      const double fp = loss(v).item<double>();
      flat[i] -= 2 * h;
      v[which] = flat.view_as(values[which]);
      const double fm = loss(v).item<double>();
      fd[i] = (fp - fm) / (2 * h);
    }
    EXPECT_LT(toy::rel_err(analytic, fd), 1e-4) << name;
  }
}

TEST(DetectorConfigIo, RoundTrip) {
  DetectorConfig c;
  c.channels = {8, 8};
  c.strides = {2, 2};
  c.dtype = torch::kFloat64;
  KeyValueConfig kv;
  c.write(kv);
  const auto back = DetectorConfig::read(kv);
  EXPECT_EQ(back.channels, c.channels);
  EXPECT_EQ(back.strides, c.strides);
  EXPECT_EQ(back.dtype, c.dtype);
  EXPECT_EQ(back.feature_stride(), 4);
  c.strides = {3, 1};
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Params, CloneAndIdentity) {
  const auto p = init_params(DetectorConfig{}, 0);
  const auto q = p.clone(true);
  EXPECT_TRUE(p.feature.identical(q.feature));
  EXPECT_TRUE(q.feature.tensors()[0].requires_grad());
  EXPECT_TRUE(init_params(DetectorConfig{}, 0).detection.identical(p.detection));
  EXPECT_FALSE(init_params(DetectorConfig{}, 1).detection.identical(p.detection));
}
