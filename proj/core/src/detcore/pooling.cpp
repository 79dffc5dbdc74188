#include "oshot/detcore/pooling.h"

#include <algorithm>
#include <cmath>

namespace oshot::det {

std::optional<CellRange> box_to_cells(const Box& box, int stride, int map_width,
                                      int map_height) {
  CellRange r;
  r.x0 = std::clamp(static_cast<int>(std::floor(box.x1 / stride)), 0, map_width);
  r.y0 = std::clamp(static_cast<int>(std::floor(box.y1 / stride)), 0, map_height);
  r.x1 = std::clamp(static_cast<int>(std::ceil(box.x2 / stride)), 0, map_width);
  r.y1 = std::clamp(static_cast<int>(std::ceil(box.y2 / stride)), 0, map_height);
  if (r.x1 <= r.x0 || r.y1 <= r.y0) return std::nullopt;
  return r;
}

torch::Tensor pool_cells(const torch::Tensor& fmap, const std::vector<CellRange>& ranges,
                         int out_size) {
  TORCH_CHECK(fmap.dim() == 3, "pool_cells expects a C x H x W map");
  const auto channels = fmap.size(0);
  const int h = static_cast<int>(fmap.size(1));
  const int w = static_cast<int>(fmap.size(2));
  const int s = out_size;
  const auto rows = static_cast<std::int64_t>(ranges.size()) * s * s;
  if (ranges.empty()) return torch::zeros({0, channels, s, s}, fmap.options());

  auto weights = torch::zeros({rows, static_cast<std::int64_t>(h) * w}, torch::kFloat64);
  auto acc = weights.accessor<double, 2>();
  for (std::size_t r = 0; r < ranges.size(); ++r) {
    const auto& c = ranges[r];
    const int lx = c.x1 - c.x0;
    const int ly = c.y1 - c.y0;
    for (int i = 0; i < s; ++i) {
      const int ys = c.y0 + (i * ly) / s;
      const int ye = c.y0 + ((i + 1) * ly + s - 1) / s;
      for (int j = 0; j < s; ++j) {
        const int xs = c.x0 + (j * lx) / s;
        const int xe = c.x0 + ((j + 1) * lx + s - 1) / s;
        const double wgt = 1.0 / ((ye - ys) * (xe - xs));
        const auto row = (static_cast<std::int64_t>(r) * s + i) * s + j;
        for (int y = ys; y < ye; ++y) {
          for (int x = xs; x < xe; ++x) acc[row][y * w + x] = wgt;
        }
      }
    }
  }
  auto flat = fmap.reshape({channels, static_cast<std::int64_t>(h) * w});
  auto pooled = torch::mm(weights.to(fmap.scalar_type()), flat.t());  // rows x C
  return pooled.view({static_cast<std::int64_t>(ranges.size()), s, s, channels})
      .permute({0, 3, 1, 2})
      .contiguous();
}

}  // namespace oshot::det
