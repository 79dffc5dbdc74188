#pragma once

#include <array>
#include <vector>

#include "oshot/common/box.h"

namespace oshot::det {

// |a ∩ b| / |a ∪ b| with half-open areas; 0 when the union is empty.
double iou(const Box& a, const Box& b);

// Greedy non-maximum suppression. Returns indices of kept boxes ordered by
// descending score; equal scores keep input order.
std::vector<int> nms(const std::vector<Box>& boxes, const std::vector<double>& scores,
                     double iou_threshold);

// Faster R-CNN box parameterization (dx, dy, dw, dh) relative to `ref`,
// divided by `weights`.
std::array<double, 4> encode_box(const Box& target, const Box& ref,
                                 const std::array<double, 4>& weights);
Box decode_box(const std::array<double, 4>& deltas, const Box& ref,
               const std::array<double, 4>& weights);

Box clip_box(const Box& b, double width, double height);

}  // namespace oshot::det
