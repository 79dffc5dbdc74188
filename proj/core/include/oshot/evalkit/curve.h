#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "oshot/adapt/adapt.h"
#include "oshot/synthgen/image.h"
#include "oshot/train/checkpoint.h"

namespace oshot::eval {

struct CurvePoint {
  int gamma = 0;
  // Missing when adaptation faulted on some image before reaching gamma.
  std::optional<double> map;
  int faults = 0;
};

// mAP@0.5 after gamma adaptation steps, for each gamma in the (ascending,
// 0-including) list. One adaptation run of max(gamma) steps per image is
// observed at every listed step; the draws are sequential, so this equals
// separate runs per gamma.
std::vector<CurvePoint> iterations_curve(const train::Checkpoint& ckpt,
                                         const std::vector<synth::AnnotatedImage>& targets,
                                         const std::vector<int>& gammas,
                                         const adapt::AdaptConfig& cfg, int threads = 1);

struct CurveTable {
  std::string label;  // e.g. target domain
  std::vector<CurvePoint> points;
};

// CSV columns: target,gamma,mAP,faults (empty mAP for missing points).
void write_curve_csv(const std::filesystem::path& path, const std::vector<CurveTable>& tables);
void plot_curves(const std::filesystem::path& path, const std::vector<CurveTable>& tables);

}  // namespace oshot::eval
