#include <benchmark/benchmark.h>
#include <torch/torch.h>

#include <vector>

#include "oshot/adapt/adapt.h"
#include "oshot/common/rng.h"
#include "oshot/detcore/box.h"
#include "oshot/detcore/detector.h"
#include "oshot/detcore/params.h"
#include "oshot/synthgen/scene.h"
#include "oshot/train/checkpoint.h"

using namespace oshot;

namespace {

std::vector<Box> random_boxes(int n, std::vector<double>& scores) {
  auto rng = make_rng(1, "bench");
  std::vector<Box> boxes;
  scores.clear();
  for (int i = 0; i < n; ++i) {
    const double x = uniform_int(rng, 0, 80), y = uniform_int(rng, 0, 80);
    boxes.push_back({x, y, x + uniform_int(rng, 4, 16), y + uniform_int(rng, 4, 16)});
    scores.push_back(uniform_int(rng, 0, 1000) / 1000.0);
  }
  return boxes;
}

train::Checkpoint bench_checkpoint() {
  train::Checkpoint ck;
  ck.params = det::init_params(ck.detector, 0);
  ck.trained_groups = {train::kFeatureGroup, train::kDetectionGroup, train::kRotationGroup};
  return ck;
}

void BM_Iou(benchmark::State& state) {
  std::vector<double> scores;
  const auto boxes = random_boxes(256, scores);
  for (auto _ : state) {
    double s = 0.0;
    for (std::size_t i = 1; i < boxes.size(); ++i) s += det::iou(boxes[i - 1], boxes[i]);
    benchmark::DoNotOptimize(s);
  }
  state.SetItemsProcessed(state.iterations() * 255);
}
BENCHMARK(BM_Iou);

void BM_Nms(benchmark::State& state) {
  std::vector<double> scores;
  const auto boxes = random_boxes(static_cast<int>(state.range(0)), scores);
  for (auto _ : state) benchmark::DoNotOptimize(det::nms(boxes, scores, 0.7));
}
BENCHMARK(BM_Nms)->Arg(100)->Arg(1000);

void BM_BackboneForward(benchmark::State& state) {
  det::DetectorConfig cfg;
  const auto p = det::init_params(cfg, 0);
  const auto img = synth::generate_scene({}, 3).image;
  const auto x = det::to_tensor(img, cfg.dtype);
  torch::NoGradGuard no_grad;
  for (auto _ : state) benchmark::DoNotOptimize(det::extract_features(x, p.feature, cfg));
}
BENCHMARK(BM_BackboneForward)->Unit(benchmark::kMillisecond);

void BM_Detect(benchmark::State& state) {
  det::DetectorConfig cfg;
  const auto p = det::init_params(cfg, 0);
  const auto x = det::to_tensor(synth::generate_scene({}, 3).image, cfg.dtype);
  torch::NoGradGuard no_grad;
  for (auto _ : state) benchmark::DoNotOptimize(det::detect(x, p.feature, p.detection, cfg, 0.05));
}
BENCHMARK(BM_Detect)->Unit(benchmark::kMillisecond);

// Cost of one-shot adaptation per image, by number of steps.
void BM_AdaptOne(benchmark::State& state) {
  const auto ck = bench_checkpoint();
  const auto img = synth::generate_scene({}, 5).image;
  adapt::AdaptConfig cfg;
  cfg.gamma = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(adapt::adapt_one(img, ck, cfg));
}
BENCHMARK(BM_AdaptOne)->Arg(0)->Arg(1)->Arg(5)->Unit(benchmark::kMillisecond);

}  // namespace

int main(int argc, char** argv) {
  torch::set_num_threads(1);
  benchmark::Initialize(&argc, argv);
  benchmark::RunSpecifiedBenchmarks();
  benchmark::Shutdown();
  return 0;
}
