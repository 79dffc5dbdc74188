#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "oshot/synthgen/image.h"

namespace oshot::synth {

enum class ShapeClass { kCircle, kTriangle, kSquare, kCross, kArrow };
enum class BackgroundStyle { kGradient, kGroundStrip };

std::string to_string(ShapeClass c);
std::string to_string(BackgroundStyle s);
BackgroundStyle background_from_string(const std::string& s);

struct SceneSpec {
  // Square images. Must be a multiple of the detector stride. The reference
  // setting of the original detector resizes the shorter side to 600 px; 96
  // keeps training on a CPU tractable.
  int image_size = 96;
  int min_objects = 1;
  int max_objects = 4;
  std::vector<ShapeClass> classes{ShapeClass::kCircle, ShapeClass::kTriangle,
                                  ShapeClass::kSquare, ShapeClass::kCross,
                                  ShapeClass::kArrow};
  BackgroundStyle background = BackgroundStyle::kGradient;
  // Strength of the orientation cue (vertical luminance gradient / ground
  // strip contrast and top-lit object shading), in [0, 1].
  double cue_strength = 0.6;
  int min_object_size = 16;
  int max_object_size = 36;

  // Throws std::invalid_argument when the spec is unusable with `stride`.
  void validate(int stride) const;
  int num_classes() const { return static_cast<int>(classes.size()); }
};

// Deterministic in (spec, seed). Labels are the tight pixel bounding boxes of
// the rendered objects. Throws std::invalid_argument when the objects cannot
// be placed without more than 50% mutual overlap in 100 attempts.
AnnotatedImage generate_scene(const SceneSpec& spec, std::uint64_t seed);

}  // namespace oshot::synth
