#include "oshot/detcore/box.h"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace oshot::det {

double iou(const Box& a, const Box& b) {
  const double iw = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  const double ih = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  const double uni = a.area() + b.area() - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

std::vector<int> nms(const std::vector<Box>& boxes, const std::vector<double>& scores,
                     double iou_threshold) {
  std::vector<int> order(boxes.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return scores[a] > scores[b]; });
  std::vector<int> keep;
  std::vector<char> removed(boxes.size(), 0);
  for (std::size_t i = 0; i < order.size(); ++i) {
    const int a = order[i];
    if (removed[a]) continue;
    keep.push_back(a);
    for (std::size_t j = i + 1; j < order.size(); ++j) {
      const int b = order[j];
      if (!removed[b] && iou(boxes[a], boxes[b]) > iou_threshold) removed[b] = 1;
    }
  }
  return keep;
}

std::array<double, 4> encode_box(const Box& t, const Box& r,
                                 const std::array<double, 4>& w) {
  const double rw = r.width(), rh = r.height();
  const double rcx = r.x1 + 0.5 * rw, rcy = r.y1 + 0.5 * rh;
  const double tw = t.width(), th = t.height();
  const double tcx = t.x1 + 0.5 * tw, tcy = t.y1 + 0.5 * th;
  return {w[0] * (tcx - rcx) / rw, w[1] * (tcy - rcy) / rh, w[2] * std::log(tw / rw),
          w[3] * std::log(th / rh)};
}

Box decode_box(const std::array<double, 4>& d, const Box& r,
               const std::array<double, 4>& w) {
  static const double kMaxLog = std::log(1000.0 / 16.0);
  const double rw = r.width(), rh = r.height();
  const double cx = r.x1 + 0.5 * rw + d[0] / w[0] * rw;
  const double cy = r.y1 + 0.5 * rh + d[1] / w[1] * rh;
  const double bw = rw * std::exp(std::min(d[2] / w[2], kMaxLog));
  const double bh = rh * std::exp(std::min(d[3] / w[3], kMaxLog));
  return {cx - 0.5 * bw, cy - 0.5 * bh, cx + 0.5 * bw, cy + 0.5 * bh};
}

Box clip_box(const Box& b, double width, double height) {
  return {std::clamp(b.x1, 0.0, width), std::clamp(b.y1, 0.0, height),
          std::clamp(b.x2, 0.0, width), std::clamp(b.y2, 0.0, height)};
}

}  // namespace oshot::det
