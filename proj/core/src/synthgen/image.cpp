#include "oshot/synthgen/image.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace oshot::synth {

void quantize(Image& img) {
  for (float& v : img.pixels()) {
    v = std::round(std::clamp(v, 0.0f, 1.0f) * 255.0f) / 255.0f;
  }
}

namespace {

void check_quarter_turns(int q) {
  if (q < 0 || q > 3) {
    throw std::invalid_argument("rotation q must be in {0,1,2,3}, got " + std::to_string(q));
  }
}

}  // namespace

Image rotate(const Image& img, int q) {
  check_quarter_turns(q);
  if (q == 0) return img;
  const int w = img.width();
  const int h = img.height();
  const bool odd = (q % 2) == 1;
  Image out(odd ? h : w, odd ? w : h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      int nx = 0;
      int ny = 0;
      switch (q) {
        case 1: nx = y; ny = w - 1 - x; break;
        case 2: nx = w - 1 - x; ny = h - 1 - y; break;
        case 3: nx = h - 1 - y; ny = x; break;
      }
      for (int c = 0; c < Image::kChannels; ++c) out.at(nx, ny, c) = img.at(x, y, c);
    }
  }
  return out;
}

Box rotate_box(const Box& b, int q, double width, double height) {
  check_quarter_turns(q);
  if (!b.valid_in(width, height)) {
    throw std::invalid_argument("rotate_box: box is not valid inside the image");
  }
  switch (q) {
    case 1: return {b.y1, width - b.x2, b.y2, width - b.x1};
    case 2: return {width - b.x2, height - b.y2, width - b.x1, height - b.y1};
    case 3: return {height - b.y2, b.x1, height - b.y1, b.x2};
    default: return b;
  }
}

}  // namespace oshot::synth
