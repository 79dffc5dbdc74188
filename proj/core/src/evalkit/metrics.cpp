#include "oshot/evalkit/metrics.h"

#include <algorithm>

#include "oshot/detcore/box.h"

namespace oshot::eval {

namespace {

struct Ref {
  int image;
  int index;
  double score;
};

// All detections (optionally of one class) in score order, stable on
// (image, index).
std::vector<Ref> ranked(const std::vector<ImageEval>& images, std::optional<int> class_id) {
  std::vector<Ref> refs;
  for (int i = 0; i < static_cast<int>(images.size()); ++i) {
    const auto& dets = images[i].detections;
    for (int j = 0; j < static_cast<int>(dets.size()); ++j) {
      if (!class_id || dets[j].class_id == *class_id) refs.push_back({i, j, dets[j].score});
    }
  }
  std::stable_sort(refs.begin(), refs.end(),
                   [](const Ref& a, const Ref& b) { return a.score > b.score; });
  return refs;
}

}  // namespace

MatchResult match_detections(const std::vector<ImageEval>& images, double iou_threshold) {
  MatchResult out;
  out.detections.resize(images.size());
  out.gt_covered.resize(images.size());
  for (std::size_t i = 0; i < images.size(); ++i) {
    out.detections[i].resize(images[i].detections.size());
    out.gt_covered[i].assign(images[i].ground_truth.size(), false);
  }
  for (const auto& r : ranked(images, std::nullopt)) {
    const auto& img = images[r.image];
    const auto& d = img.detections[r.index];
    auto& m = out.detections[r.image][r.index];
    int best_any = -1;
    int best_free = -1;
    double best_free_iou = 0.0;
    for (int g = 0; g < static_cast<int>(img.ground_truth.size()); ++g) {
      const double v = det::iou(d.box, img.ground_truth[g].box);
      if (v > m.iou_max) {
        m.iou_max = v;
        best_any = g;
      }
      if (img.ground_truth[g].class_id == d.class_id && !out.gt_covered[r.image][g] &&
          v >= iou_threshold && v > best_free_iou) {
        best_free_iou = v;
        best_free = g;
      }
    }
    m.class_correct = best_any >= 0 && img.ground_truth[best_any].class_id == d.class_id;
    if (best_free >= 0) {
      m.matched_gt = best_free;
      out.gt_covered[r.image][best_free] = true;
    }
  }
  return out;
}

std::optional<double> average_precision(const std::vector<ImageEval>& images, int class_id,
                                        double iou_threshold) {
  int num_gt = 0;
  for (const auto& img : images) {
    for (const auto& g : img.ground_truth) num_gt += g.class_id == class_id ? 1 : 0;
  }
  if (num_gt == 0) return std::nullopt;

  std::vector<std::vector<bool>> used(images.size());
  for (std::size_t i = 0; i < images.size(); ++i) used[i].assign(images[i].ground_truth.size(), false);

  std::vector<double> recall, precision;
  int tp = 0, fp = 0;
  for (const auto& r : ranked(images, class_id)) {
    const auto& img = images[r.image];
    int best = -1;
    double best_iou = 0.0;
    for (int g = 0; g < static_cast<int>(img.ground_truth.size()); ++g) {
      if (img.ground_truth[g].class_id != class_id || used[r.image][g]) continue;
      const double v = det::iou(img.detections[r.index].box, img.ground_truth[g].box);
      if (v >= iou_threshold && v > best_iou) {
        best_iou = v;
        best = g;
      }
    }
    if (best >= 0) {
      used[r.image][best] = true;
      ++tp;
    } else {
      ++fp;
    }
    recall.push_back(static_cast<double>(tp) / num_gt);
    precision.push_back(static_cast<double>(tp) / (tp + fp));
  }
  if (recall.empty()) return 0.0;

  // Area under the monotone precision envelope.
  std::vector<double> mrec{0.0};
  std::vector<double> mpre{0.0};
  mrec.insert(mrec.end(), recall.begin(), recall.end());
  mpre.insert(mpre.end(), precision.begin(), precision.end());
  mrec.push_back(1.0);
  mpre.push_back(0.0);
  for (std::size_t i = mpre.size() - 1; i > 0; --i) mpre[i - 1] = std::max(mpre[i - 1], mpre[i]);
  double ap = 0.0;
  for (std::size_t i = 0; i + 1 < mrec.size(); ++i) {
    if (mrec[i + 1] != mrec[i]) ap += (mrec[i + 1] - mrec[i]) * mpre[i + 1];
  }
  return ap;
}

double mean_average_precision(const std::vector<ImageEval>& images, int num_classes,
                              double iou_threshold) {
  double sum = 0.0;
  int n = 0;
  for (int c = 0; c < num_classes; ++c) {
    if (auto ap = average_precision(images, c, iou_threshold)) {
      sum += *ap;
      ++n;
    }
  }
  return n ? sum / n : 0.0;
}

}  // namespace oshot::eval
