#pragma once

#include <optional>
#include <vector>

#include "oshot/common/box.h"
#include "oshot/detcore/detector.h"

namespace oshot::eval {

// Detections and ground truth of one image.
struct ImageEval {
  std::vector<det::Detection> detections;
  std::vector<BoxLabel> ground_truth;
};

struct DetectionMatch {
  std::optional<int> matched_gt;  // index into the image's ground truth
  double iou_max = 0.0;           // over ground truth of any class
  bool class_correct = false;     // class of the max-IoU ground truth
};

// Per-image match of every detection, plus coverage of every ground-truth box.
struct MatchResult {
  std::vector<std::vector<DetectionMatch>> detections;
  std::vector<std::vector<bool>> gt_covered;
};

// Greedy matching by descending score (ties: image index, then detection
// index). A detection takes the highest-IoU unmatched ground truth of its own
// class with IoU >= threshold.
MatchResult match_detections(const std::vector<ImageEval>& images, double iou_threshold = 0.5);

// All-point interpolated AP of one class. 0 when the class has ground truth
// but no detections; nullopt when the class has no ground truth at all.
std::optional<double> average_precision(const std::vector<ImageEval>& images, int class_id,
                                        double iou_threshold = 0.5);

// Mean AP over classes with at least one ground-truth box.
double mean_average_precision(const std::vector<ImageEval>& images, int num_classes,
                              double iou_threshold = 0.5);

}  // namespace oshot::eval
