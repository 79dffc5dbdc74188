#pragma once

#include <optional>
#include <vector>

#include <torch/torch.h>

#include "oshot/common/box.h"

namespace oshot::det {

// Half-open range of feature cells [x0, x1) x [y0, y1).
struct CellRange {
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;
  friend bool operator==(const CellRange&, const CellRange&) = default;
};

// Image box -> feature cells: floor of the near edge, ceil of the far edge,
// clamped to the map. nullopt when nothing is left after clamping.
std::optional<CellRange> box_to_cells(const Box& box, int stride, int map_width,
                                      int map_height);

// Adaptive average pooling of each range to out_size x out_size, expressed as
// one (R*s*s) x (H*W) weight matrix so that the result stays differentiable
// to any order with respect to the map. fmap is C x H x W; returns
// R x C x s x s.
torch::Tensor pool_cells(const torch::Tensor& fmap, const std::vector<CellRange>& ranges,
                         int out_size);

}  // namespace oshot::det
