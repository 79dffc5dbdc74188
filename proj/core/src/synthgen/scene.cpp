#include "oshot/synthgen/scene.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>

#include "oshot/common/rng.h"

namespace oshot::synth {

std::string to_string(ShapeClass c) {
  switch (c) {
    case ShapeClass::kCircle: return "circle";
    case ShapeClass::kTriangle: return "triangle";
    case ShapeClass::kSquare: return "square";
    case ShapeClass::kCross: return "cross";
    case ShapeClass::kArrow: return "arrow";
  }
  return "unknown";
}

std::string to_string(BackgroundStyle s) {
  return s == BackgroundStyle::kGradient ? "gradient" : "ground-strip";
}

BackgroundStyle background_from_string(const std::string& s) {
  if (s == "gradient") return BackgroundStyle::kGradient;
  if (s == "ground-strip") return BackgroundStyle::kGroundStrip;
  throw std::invalid_argument("unknown background style `" + s + "`");
}

void SceneSpec::validate(int stride) const {
  if (stride <= 0 || image_size <= 0 || image_size % stride != 0) {
    throw std::invalid_argument("image_size must be a positive multiple of the stride " +
                                std::to_string(stride));
  }
  if (min_objects < 1 || max_objects < min_objects) {
    throw std::invalid_argument("object count range must satisfy 1 <= min <= max");
  }
  if (classes.empty()) throw std::invalid_argument("class set is empty");
  if (min_object_size < 4 || max_object_size < min_object_size ||
      max_object_size * 3 / 2 >= image_size) {
    throw std::invalid_argument("object size range does not fit the image");
  }
  if (cue_strength < 0.0 || cue_strength > 1.0) {
    throw std::invalid_argument("cue_strength must lie in [0, 1]");
  }
}

namespace {

using Color = std::array<float, 3>;

// Shape membership in normalized box coordinates (u right, v down), both in
// [0, 1]. Shapes with a canonical "up" (triangle) or "right" (arrow) make the
// object itself orientation-bearing.
bool inside(ShapeClass shape, double u, double v) {
  switch (shape) {
    case ShapeClass::kCircle:
      return (u - 0.5) * (u - 0.5) + (v - 0.5) * (v - 0.5) <= 0.25;
    case ShapeClass::kTriangle:
      return std::abs(u - 0.5) <= 0.5 * v;
    case ShapeClass::kSquare:
      return true;
    case ShapeClass::kCross:
      return std::abs(u - 0.5) <= 0.17 || std::abs(v - 0.5) <= 0.17;
    case ShapeClass::kArrow:
      if (u < 0.5) return std::abs(v - 0.5) <= 0.16;
      return std::abs(v - 0.5) <= (1.0 - u);
  }
  return false;
}

double aspect_for(ShapeClass shape, Rng& rng) {
  switch (shape) {
    case ShapeClass::kTriangle: return uniform(rng, 0.85, 1.2);
    case ShapeClass::kArrow: return uniform(rng, 1.25, 1.45);
    default: return 1.0;
  }
}

Color hsv(double h, double s, double v) {
  const double c = v * s;
  const double hp = std::fmod(h, 1.0) * 6.0;
  const double x = c * (1.0 - std::abs(std::fmod(hp, 2.0) - 1.0));
  double r = 0, g = 0, b = 0;
  if (hp < 1) { r = c; g = x; }
  else if (hp < 2) { r = x; g = c; }
  else if (hp < 3) { g = c; b = x; }
  else if (hp < 4) { g = x; b = c; }
  else if (hp < 5) { r = x; b = c; }
  else { r = c; b = x; }
  const double m = v - c;
  return {static_cast<float>(r + m), static_cast<float>(g + m), static_cast<float>(b + m)};
}

void paint_background(Image& img, const SceneSpec& spec, Rng& rng) {
  const int n = img.height();
  const double hue = uniform(rng, 0.0, 1.0);
  const Color sky = hsv(hue, uniform(rng, 0.1, 0.3), 0.9);
  const Color ground = hsv(hue + 0.5, uniform(rng, 0.2, 0.4), 0.55);
  const double k = spec.cue_strength;
  for (int y = 0; y < n; ++y) {
    const double t = (y + 0.5) / n;
    for (int x = 0; x < img.width(); ++x) {
      for (int c = 0; c < 3; ++c) {
        double v = 0.0;
        if (spec.background == BackgroundStyle::kGradient) {
          // Bright top to darker bottom, blended by the cue strength.
          v = sky[c] * (1.0 - k * 0.6 * t) + k * 0.15 * t * ground[c];
        } else {
          v = (t > 0.82) ? (1.0 - k) * sky[c] + k * 0.35 * ground[c] : sky[c] * (1.0 - 0.1 * k);
        }
        img.at(x, y, c) = static_cast<float>(v);
      }
    }
  }
}

struct Placement {
  int x = 0, y = 0, w = 0, h = 0;
};

// Intersection over the smaller area.
double mutual_overlap(const Placement& a, const Placement& b) {
  const int ix = std::max(0, std::min(a.x + a.w, b.x + b.w) - std::max(a.x, b.x));
  const int iy = std::max(0, std::min(a.y + a.h, b.y + b.h) - std::max(a.y, b.y));
  const double inter = static_cast<double>(ix) * iy;
  const double smaller = std::min(a.w * a.h, b.w * b.h);
  return inter / smaller;
}

}  // namespace

AnnotatedImage generate_scene(const SceneSpec& spec, std::uint64_t seed) {
  Rng rng(mix64(seed ^ 0x5ce9e5eedULL));
  const int n = spec.image_size;
  AnnotatedImage out;
  out.image = Image(n, n);
  out.id = "scene-" + std::to_string(seed);
  paint_background(out.image, spec, rng);

  const int count = uniform_int(rng, spec.min_objects, spec.max_objects);
  std::vector<Placement> placed;
  for (int i = 0; i < count; ++i) {
    const int class_index = uniform_int(rng, 0, spec.num_classes() - 1);
    const ShapeClass shape = spec.classes[class_index];
    Placement p;
    bool ok = false;
    for (int attempt = 0; attempt < 100 && !ok; ++attempt) {
      const int side = uniform_int(rng, spec.min_object_size, spec.max_object_size);
      const double aspect = aspect_for(shape, rng);
      p.h = side;
      p.w = std::min(n - 2, static_cast<int>(std::lround(side * aspect)));
      p.x = uniform_int(rng, 1, n - 1 - p.w);
      p.y = uniform_int(rng, 1, n - 1 - p.h);
      ok = std::all_of(placed.begin(), placed.end(),
                       [&](const Placement& q) { return mutual_overlap(p, q) <= 0.5; });
    }
    if (!ok) {
      throw std::invalid_argument(
          "generate_scene: cannot place objects without >50% overlap after 100 attempts");
    }
    placed.push_back(p);

    const Color base = hsv(uniform(rng, 0.0, 1.0), uniform(rng, 0.6, 1.0),
                           uniform(rng, 0.45, 0.85));
    int bx1 = n, by1 = n, bx2 = 0, by2 = 0;
    for (int y = p.y; y < p.y + p.h; ++y) {
      const double v = (y - p.y + 0.5) / p.h;
      // Top-lit shading: a per-object orientation cue.
      const double shade = 1.0 + spec.cue_strength * (0.25 - 0.5 * v);
      for (int x = p.x; x < p.x + p.w; ++x) {
        const double u = (x - p.x + 0.5) / p.w;
        if (!inside(shape, u, v)) continue;
        for (int c = 0; c < 3; ++c) {
          out.image.at(x, y, c) = static_cast<float>(base[c] * shade);
        }
        bx1 = std::min(bx1, x);
        by1 = std::min(by1, y);
        bx2 = std::max(bx2, x + 1);
        by2 = std::max(by2, y + 1);
      }
    }
    out.labels.push_back({class_index, Box{static_cast<double>(bx1), static_cast<double>(by1),
                                           static_cast<double>(bx2), static_cast<double>(by2)}});
  }
  quantize(out.image);
  return out;
}

}  // namespace oshot::synth
