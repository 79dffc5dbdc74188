#include "oshot/synthgen/augment.h"

#include <stdexcept>

#include "oshot/common/rng.h"

namespace oshot::synth {

std::string to_string(AugmentKind k) {
  switch (k) {
    case AugmentKind::kIdentity: return "identity";
    case AugmentKind::kGrayscale: return "grayscale";
    case AugmentKind::kColorJitter: return "color-jitter";
    case AugmentKind::kBrightness: return "brightness";
    case AugmentKind::kContrast: return "contrast";
  }
  return "unknown";
}

AugmentKind augment_from_string(const std::string& s) {
  for (auto k : augment_catalogue()) {
    if (to_string(k) == s) return k;
  }
  throw std::invalid_argument("unknown augmentation kind `" + s + "`");
}

const std::vector<AugmentKind>& augment_catalogue() {
  static const std::vector<AugmentKind> all{AugmentKind::kIdentity, AugmentKind::kGrayscale,
                                            AugmentKind::kColorJitter, AugmentKind::kBrightness,
                                            AugmentKind::kContrast};
  return all;
}

Image augment(const Image& img, AugmentKind kind, std::uint64_t seed) {
  if (kind == AugmentKind::kIdentity) return img;
  Rng rng(mix64(seed ^ 0xa5a5a5a5ULL));
  Image out = img;
  auto& px = out.pixels();
  switch (kind) {
    case AugmentKind::kGrayscale:
      for (std::size_t i = 0; i < px.size(); i += 3) {
        const float l = luminance(px[i], px[i + 1], px[i + 2]);
        px[i] = px[i + 1] = px[i + 2] = l;
      }
      break;
    case AugmentKind::kColorJitter: {
      float gain[3];
      for (float& g : gain) g = static_cast<float>(uniform(rng, 0.75, 1.25));
      const float sat = static_cast<float>(uniform(rng, 0.6, 1.4));
      for (std::size_t i = 0; i < px.size(); i += 3) {
        const float l = luminance(px[i], px[i + 1], px[i + 2]);
        for (int c = 0; c < 3; ++c) px[i + c] = (l + sat * (px[i + c] - l)) * gain[c];
      }
      break;
    }
    case AugmentKind::kBrightness: {
      const float delta = static_cast<float>(uniform(rng, -0.2, 0.2));
      for (float& v : px) v += delta;
      break;
    }
    case AugmentKind::kContrast: {
      double mean = 0.0;
      for (float v : px) mean += v;
      mean /= static_cast<double>(px.size());
      const double f = uniform(rng, 0.6, 1.4);
      for (float& v : px) v = static_cast<float>(mean + f * (v - mean));
      break;
    }
    case AugmentKind::kIdentity:
      break;
  }
  quantize(out);
  return out;
}

AnnotatedImage augment(const AnnotatedImage& img, AugmentKind kind, std::uint64_t seed) {
  AnnotatedImage out = img;
  out.image = augment(img.image, kind, seed);
  return out;
}

}  // namespace oshot::synth
