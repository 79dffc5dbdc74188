#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "oshot/common/box.h"

namespace oshot::synth {

// H x W x 3 float image, row-major, values in [0, 1].
class Image {
 public:
  static constexpr int kChannels = 3;

  Image() = default;
  Image(int width, int height, float fill = 0.0f)
      : width_(width), height_(height),
        pixels_(static_cast<std::size_t>(width) * height * kChannels, fill) {}

  int width() const { return width_; }
  int height() const { return height_; }
  bool empty() const { return pixels_.empty(); }

  float& at(int x, int y, int c) { return pixels_[index(x, y, c)]; }
  float at(int x, int y, int c) const { return pixels_[index(x, y, c)]; }

  std::vector<float>& pixels() { return pixels_; }
  const std::vector<float>& pixels() const { return pixels_; }

  friend bool operator==(const Image&, const Image&) = default;

 private:
  std::size_t index(int x, int y, int c) const {
    return (static_cast<std::size_t>(y) * width_ + x) * kChannels + c;
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<float> pixels_;
};

struct AnnotatedImage {
  Image image;
  std::vector<BoxLabel> labels;
  std::string domain;
  std::string id;
};

// Rounds every channel to the nearest multiple of 1/255 after clamping to
// [0, 1], so that images survive an 8-bit PNG round trip bit-exactly.
void quantize(Image& img);

// Counter-clockwise quarter turns. Odd q swaps the dimensions. Throws
// std::invalid_argument for q outside {0..3}.
Image rotate(const Image& img, int q);

// Axis-aligned box of the rotated region in the rotated frame, for a box in a
// width x height image rotated by q counter-clockwise quarter turns.
Box rotate_box(const Box& box, int q, double width, double height);

// Luminance (Rec. 601 weights).
inline float luminance(float r, float g, float b) {
  return 0.299f * r + 0.587f * g + 0.114f * b;
}

}  // namespace oshot::synth
