#include "oshot/evalkit/tide.h"

#include <algorithm>

#include "oshot/detcore/box.h"

namespace oshot::eval {

const char* to_string(ErrorType t) {
  switch (t) {
    case ErrorType::kCls: return "Cls";
    case ErrorType::kLoc: return "Loc";
    case ErrorType::kBoth: return "Both";
    case ErrorType::kDupe: return "Dupe";
    case ErrorType::kBkg: return "Bkg";
    case ErrorType::kMiss: return "Miss";
  }
  return "?";
}

TideResult tide_analyze(const std::vector<ImageEval>& images, int num_classes,
                        const TideThresholds& thr) {
  TideResult out;
  out.match = match_detections(images, thr.foreground);
  out.categories.resize(images.size());
  out.missed.resize(images.size());
  auto& b = out.breakdown;
  b.map50 = mean_average_precision(images, num_classes, thr.foreground);

  for (std::size_t i = 0; i < images.size(); ++i) {
    const auto& img = images[i];
    std::vector<bool> referenced(img.ground_truth.size(), false);
    out.categories[i].resize(img.detections.size());
    for (std::size_t j = 0; j < img.detections.size(); ++j) {
      if (out.match.detections[i][j].matched_gt) continue;
      const auto& d = img.detections[j];
      double iou_same = 0.0, iou_other = 0.0;
      int gt_same = -1, gt_other = -1;
      for (int g = 0; g < static_cast<int>(img.ground_truth.size()); ++g) {
        const double v = det::iou(d.box, img.ground_truth[g].box);
        if (img.ground_truth[g].class_id == d.class_id) {
          if (v > iou_same) { iou_same = v; gt_same = g; }
        } else if (v > iou_other) {
          iou_other = v;
          gt_other = g;
        }
      }
      const double iou_any = std::max(iou_same, iou_other);
      FalsePositiveCategory c;
      c.is_false_positive = true;
      if (iou_any < thr.background) {
        c.type = ErrorType::kBkg;
      } else if (iou_same >= thr.foreground) {
        c.type = ErrorType::kDupe;
        c.target_gt = gt_same;
      } else if (iou_other >= thr.foreground) {
        c.type = ErrorType::kCls;
        c.target_gt = gt_other;
      } else if (iou_same >= thr.background) {
        c.type = ErrorType::kLoc;
        c.target_gt = gt_same;
      } else {
        c.type = ErrorType::kBoth;
        c.target_gt = gt_other;
      }
      if (c.type == ErrorType::kCls || c.type == ErrorType::kLoc || c.type == ErrorType::kBoth) {
        referenced[c.target_gt] = true;
      }
      out.categories[i][j] = c;
      ++b.counts[static_cast<int>(c.type)];
      ++b.fp_count;
    }
    out.missed[i].assign(img.ground_truth.size(), false);
    for (std::size_t g = 0; g < img.ground_truth.size(); ++g) {
      if (!out.match.gt_covered[i][g]) {
        ++b.fn_count;
        if (!referenced[g]) {
          out.missed[i][g] = true;
          ++b.counts[static_cast<int>(ErrorType::kMiss)];
        }
      }
    }
  }

  int total = 0;
  for (int c : b.counts) total += c;
  for (int t = 0; t < kNumErrorTypes; ++t) {
    b.shares[t] = total ? static_cast<double>(b.counts[t]) / total : 0.0;
    b.impact[t] = (1.0 - b.map50) * b.shares[t];
  }
  return out;
}

ErrorBreakdown tide_decompose(const std::vector<ImageEval>& images, int num_classes,
                              const TideThresholds& thr) {
  return tide_analyze(images, num_classes, thr).breakdown;
}

}  // namespace oshot::eval
