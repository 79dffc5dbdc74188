#include <fstream>
#include <gtest/gtest.h>

#include <filesystem>

#include "oshot/common/errors.h"
#include "oshot/evalkit/curve.h"
#include "oshot/evalkit/evaluate.h"
#include "oshot/evalkit/metrics.h"
#include "oshot/evalkit/plot.h"
#include "oshot/evalkit/tide.h"
#include "oshot/synthgen/dataset_io.h"
#include "../support/toy.h"

using namespace oshot;
using namespace oshot::eval;
namespace fs = std::filesystem;

namespace {

det::Detection D(int c, Box b, double s) { return {c, b, s}; }
BoxLabel G(int c, Box b) { return {c, b}; }

const Box kGt{0, 0, 10, 10};

}  // namespace

TEST(AveragePrecision, SpecExamples) {
  EXPECT_DOUBLE_EQ(*average_precision({{{D(0, {0, 0, 10, 9}, 0.9)}, {G(0, kGt)}}}, 0), 1.0);
  EXPECT_DOUBLE_EQ(*average_precision({{{D(0, {50, 50, 60, 60}, 0.9), D(0, kGt, 0.8)}, {G(0, kGt)}}}, 0), 0.5);
  EXPECT_DOUBLE_EQ(*average_precision({{{}, {G(0, kGt)}}}, 0), 0.0);
  EXPECT_FALSE(average_precision({{{D(1, kGt, 0.9)}, {G(0, kGt)}}}, 1).has_value());
}

TEST(AveragePrecision, MapExcludesClassesWithoutGroundTruth) {
  const std::vector<ImageEval> imgs{{{D(0, kGt, 0.9), D(1, {30, 30, 40, 40}, 0.8)}, {G(0, kGt)}}};
  EXPECT_DOUBLE_EQ(mean_average_precision(imgs, 3), 1.0);
}

TEST(AveragePrecision, ScoreScalingInvariance) {
  const std::vector<ImageEval> imgs{
      {{D(0, kGt, 0.9), D(0, {1, 1, 11, 11}, 0.7), D(1, {20, 20, 30, 30}, 0.4)}, {G(0, kGt), G(1, {20, 20, 32, 30})}},
      {{D(0, {5, 5, 15, 15}, 0.6)}, {G(0, {5, 5, 15, 15}), G(0, {40, 40, 50, 50})}}};
  auto scaled = imgs;
  for (auto& im : scaled)
    for (auto& d : im.detections) d.score *= 0.25;
  EXPECT_EQ(mean_average_precision(imgs, 2), mean_average_precision(scaled, 2));
  EXPECT_EQ(tide_decompose(imgs, 2).counts, tide_decompose(scaled, 2).counts);
}

TEST(Matching, GreedyByScoreWithStableTies) {
  const std::vector<ImageEval> imgs{{{D(0, {0, 0, 10, 10}, 0.5), D(0, {0, 0, 10, 10}, 0.5)}, {G(0, kGt)}}};
  const auto m = match_detections(imgs);
  EXPECT_EQ(m.detections[0][0].matched_gt, 0);
  EXPECT_FALSE(m.detections[0][1].matched_gt.has_value());
  EXPECT_TRUE(m.gt_covered[0][0]);
}

TEST(Tide, SpecCategories) {
  // IoU 0.6 with another class's box.
  auto cls = tide_analyze({{{D(1, {0, 0, 10, 6}, 0.9)}, {G(0, kGt)}}}, 2);
  EXPECT_EQ(cls.categories[0][0].type, ErrorType::kCls);
  auto loc = tide_analyze({{{D(0, {0, 0, 10, 3}, 0.9)}, {G(0, kGt)}}}, 2);
  EXPECT_EQ(loc.categories[0][0].type, ErrorType::kLoc);
  auto bkg = tide_analyze({{{D(0, {9.5, 0, 19.5, 10}, 0.9)}, {G(0, kGt)}}}, 2);
  EXPECT_EQ(bkg.categories[0][0].type, ErrorType::kBkg);
  auto dupe = tide_analyze({{{D(0, kGt, 0.9), D(0, {0, 0, 10, 9}, 0.8)}, {G(0, kGt)}}}, 2);
  EXPECT_FALSE(dupe.categories[0][0].is_false_positive);
  EXPECT_EQ(dupe.categories[0][1].type, ErrorType::kDupe);
  auto miss = tide_analyze({{{D(0, {50, 50, 60, 60}, 0.9)}, {G(0, kGt)}}}, 2);
  EXPECT_TRUE(miss.missed[0][0]);
  EXPECT_EQ(miss.breakdown.count(ErrorType::kMiss), 1);
  EXPECT_EQ(miss.breakdown.count(ErrorType::kBkg), 1);
  EXPECT_EQ(miss.breakdown.fn_count, 1);
  EXPECT_EQ(miss.breakdown.fp_count, 1);
}

TEST(Tide, SharesAndImpactNonNegative) {
  const auto b = tide_decompose({{{D(0, {0, 0, 10, 3}, 0.9), D(1, kGt, 0.5)}, {G(0, kGt), G(1, {30, 30, 40, 40})}}}, 2);
  double total = 0.0;
  for (int t = 0; t < kNumErrorTypes; ++t) {
    EXPECT_GE(b.shares[static_cast<std::size_t>(t)], 0.0);
    EXPECT_GE(b.impact[static_cast<std::size_t>(t)], 0.0);
    total += b.shares[static_cast<std::size_t>(t)];
  }
  EXPECT_NEAR(total, 1.0, 1e-12);
}

TEST(Curve, SingleZeroGammaIsPlainInference) {
  train::Checkpoint ck;
  ck.detector = toy::toy_detector(false);
  ck.params = toy::random_params(ck.detector, 2);
  ck.trained_groups = {train::kFeatureGroup, train::kDetectionGroup, train::kRotationGroup};
  std::vector<synth::AnnotatedImage> data;
  for (int i = 0; i < 4; ++i) data.push_back(toy::toy_image(70 + static_cast<std::uint64_t>(i)));
  adapt::AdaptConfig cfg;
  cfg.inner_lr = 0.05;
  const auto one = iterations_curve(ck, data, {0}, cfg);
  ASSERT_EQ(one.size(), 1u);
  EXPECT_EQ(*one[0].map, dataset_map(data, ck.params.feature, ck.params.detection, ck.detector));
  const auto many = iterations_curve(ck, data, {0, 1, 3}, cfg);
  ASSERT_EQ(many.size(), 3u);
  EXPECT_EQ(*many[0].map, *one[0].map);
  // Observing a longer run equals running each gamma on its own.
  std::vector<eval::ImageEval> evals;
  cfg.gamma = 1;
  for (const auto& r : adapt::adapt_batch(data, ck, cfg)) evals.push_back({r.detections, {}});
  for (std::size_t i = 0; i < data.size(); ++i) evals[i].ground_truth = data[i].labels;
  EXPECT_EQ(*many[1].map, mean_average_precision(evals, ck.detector.num_classes));
  EXPECT_THROW(iterations_curve(ck, data, {1, 2}, cfg), ConfigError);
  EXPECT_THROW(iterations_curve(ck, data, {0, 2, 1}, cfg), ConfigError);
}

TEST(Plot, WritesPngs) {
  const auto dir = fs::temp_directory_path() / "oshot-plot-test";
  fs::create_directories(dir);
  line_plot(dir / "line.png", "title", "x", "y", {{"a", {0, 1, 2}, {0.2, std::nan(""), 0.4}, palette(0)}});
  bar_chart(dir / "bar.png", "bars", "share", {"Cls", "Loc"}, {{"v", {0.25, 0.75}, palette(1)}});
  const auto img = synth::read_png(dir / "line.png");
  EXPECT_GT(img.width(), 0);
  EXPECT_TRUE(fs::exists(dir / "bar.png"));
  const std::vector<CurveTable> tables{{"t", {{0, 0.5, 0}, {5, std::nullopt, 2}}}};
  write_curve_csv(dir / "c.csv", tables);
  std::ifstream f(dir / "c.csv");
  std::string header, r0, r1;
  std::getline(f, header);
  std::getline(f, r0);
  std::getline(f, r1);
  EXPECT_EQ(header, "target,gamma,mAP,faults");
  EXPECT_EQ(r1, "t,5,,2");
}
