#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "oshot/synthgen/image.h"

namespace oshot::synth {

// Semantic-preserving augmentations. None of them moves pixels, so labels
// are carried over unchanged.
enum class AugmentKind { kIdentity, kGrayscale, kColorJitter, kBrightness, kContrast };

std::string to_string(AugmentKind k);
AugmentKind augment_from_string(const std::string& s);
const std::vector<AugmentKind>& augment_catalogue();

// Deterministic for a fixed seed.
AnnotatedImage augment(const AnnotatedImage& img, AugmentKind kind, std::uint64_t seed);
Image augment(const Image& img, AugmentKind kind, std::uint64_t seed);

}  // namespace oshot::synth
