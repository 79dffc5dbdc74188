#pragma once

#include <ostream>

namespace oshot {

// Axis-aligned box in absolute pixel coordinates, half-open
// [x1, x2) x [y1, y2).
struct Box {
  double x1 = 0.0;
  double y1 = 0.0;
  double x2 = 0.0;
  double y2 = 0.0;

  double width() const { return x2 - x1; }
  double height() const { return y2 - y1; }
  double area() const { return (x2 > x1 && y2 > y1) ? (x2 - x1) * (y2 - y1) : 0.0; }

  // 0 <= x1 < x2 <= W and 0 <= y1 < y2 <= H.
  bool valid_in(double width, double height) const {
    return 0.0 <= x1 && x1 < x2 && x2 <= width && 0.0 <= y1 && y1 < y2 && y2 <= height;
  }

  friend bool operator==(const Box&, const Box&) = default;
};

inline std::ostream& operator<<(std::ostream& os, const Box& b) {
  return os << "(" << b.x1 << "," << b.y1 << "," << b.x2 << "," << b.y2 << ")";
}

struct BoxLabel {
  int class_id = 0;
  Box box;

  friend bool operator==(const BoxLabel&, const BoxLabel&) = default;
};

}  // namespace oshot
