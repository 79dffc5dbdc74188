#include "oshot/synthgen/domain.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "oshot/common/config.h"
#include "oshot/common/errors.h"
#include "oshot/common/rng.h"

namespace oshot::synth {

namespace {

const std::vector<std::string>& known_kinds() {
  static const std::vector<std::string> kinds{"palette", "texture", "fog", "edge", "noise"};
  return kinds;
}

void check_kind(const std::string& kind) {
  const auto& kinds = known_kinds();
  if (std::find(kinds.begin(), kinds.end(), kind) == kinds.end()) {
    throw ConfigError("unknown domain transform `" + kind + "`");
  }
}

void palette(Image& img, double s) {
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      const float r = img.at(x, y, 0), g = img.at(x, y, 1), b = img.at(x, y, 2);
      // Rotate channels (r,g,b) -> (b,r,g), push toward a warm cartoon tint.
      const float rot[3] = {b, r, g};
      const float tint[3] = {0.95f, 0.75f, 0.35f};
      for (int c = 0; c < 3; ++c) {
        const double mixed = (1.0 - s) * img.at(x, y, c) + s * rot[c];
        img.at(x, y, c) = static_cast<float>(mixed * (1.0 - 0.35 * s) + 0.35 * s * tint[c]);
      }
    }
  }
}

void texture(Image& img, double s, double period) {
  const double k = 2.0 * std::numbers::pi / std::max(2.0, period);
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      const double t = 0.5 + 0.5 * std::sin(k * (x + 0.6 * y));
      for (int c = 0; c < 3; ++c) {
        const double pattern = t * (c == 2 ? 0.4 : 0.9);
        img.at(x, y, c) = static_cast<float>((1.0 - s) * img.at(x, y, c) + s * pattern);
      }
    }
  }
}

void fog(Image& img, double density) {
  static constexpr float kFog[3] = {0.82f, 0.83f, 0.86f};
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      for (int c = 0; c < 3; ++c) {
        float& v = img.at(x, y, c);
        v = static_cast<float>(v + density * (kFog[c] - v));
      }
    }
  }
}

void edge(Image& img, double s) {
  const int w = img.width(), h = img.height();
  std::vector<float> lum(static_cast<std::size_t>(w) * h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      lum[y * w + x] = luminance(img.at(x, y, 0), img.at(x, y, 1), img.at(x, y, 2));
  auto L = [&](int x, int y) {
    return lum[std::clamp(y, 0, h - 1) * w + std::clamp(x, 0, w - 1)];
  };
  const double levels = 4.0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double gx = L(x + 1, y - 1) + 2 * L(x + 1, y) + L(x + 1, y + 1) -
                        L(x - 1, y - 1) - 2 * L(x - 1, y) - L(x - 1, y + 1);
      const double gy = L(x - 1, y + 1) + 2 * L(x, y + 1) + L(x + 1, y + 1) -
                        L(x - 1, y - 1) - 2 * L(x, y - 1) - L(x + 1, y - 1);
      const double mag = std::min(1.0, std::sqrt(gx * gx + gy * gy) * 1.5);
      for (int c = 0; c < 3; ++c) {
        const double v = img.at(x, y, c);
        const double poster = std::round(v * levels) / levels;
        const double styl = poster * (1.0 - mag);
        img.at(x, y, c) = static_cast<float>((1.0 - s) * v + s * styl);
      }
    }
  }
}

void noise(Image& img, double sigma, Rng& rng) {
  for (float& v : img.pixels()) v = static_cast<float>(v + normal(rng, 0.0, sigma));
}

}  // namespace

double ShiftTransform::param(const std::string& key, double fallback) const {
  auto it = params.find(key);
  return it == params.end() ? fallback : it->second;
}

DomainSpec DomainSpec::parse(const std::string& name, const std::string& chain) {
  DomainSpec d;
  d.name = name;
  for (const auto& item : split(chain, ';')) {
    ShiftTransform t;
    const auto colon = item.find(':');
    t.kind = trim(item.substr(0, colon));
    check_kind(t.kind);
    if (colon != std::string::npos) {
      for (const auto& kv : split(item.substr(colon + 1), ',')) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) {
          throw ConfigError("domain transform parameter `" + kv + "` is not key=value");
        }
        try {
          t.params[trim(kv.substr(0, eq))] = std::stod(kv.substr(eq + 1));
        } catch (const std::exception&) {
          throw ConfigError("domain transform parameter `" + kv + "` is not numeric");
        }
      }
    }
    d.transform_chain.push_back(std::move(t));
  }
  return d;
}

std::string DomainSpec::chain_string() const {
  std::ostringstream os;
  for (std::size_t i = 0; i < transform_chain.size(); ++i) {
    if (i) os << ";";
    os << transform_chain[i].kind;
    bool first = true;
    for (const auto& [k, v] : transform_chain[i].params) {
      os << (first ? ":" : ",") << k << "=" << v;
      first = false;
    }
  }
  return os.str();
}

std::vector<DomainSpec> default_target_domains(int count) {
  static const std::vector<std::pair<std::string, std::string>> presets{
      {"foggy", "fog:density=0.55;noise:sigma=0.03"},
      {"clipart", "palette:strength=0.8;edge:strength=0.7"},
      {"textured", "texture:strength=0.35,period=6;noise:sigma=0.05"},
      {"dusk", "palette:strength=0.4;fog:density=0.3;noise:sigma=0.04"},
      {"comic", "edge:strength=1.0;texture:strength=0.2,period=4"},
      {"watercolor", "fog:density=0.25;palette:strength=0.5;texture:strength=0.15,period=10"},
      {"grainy", "noise:sigma=0.1"},
      {"haze", "fog:density=0.7"},
  };
  if (count < 1 || count > static_cast<int>(presets.size())) {
    throw ConfigError("target domain count must be in 1..8");
  }
  std::vector<DomainSpec> out;
  for (int i = 0; i < count; ++i) out.push_back(DomainSpec::parse(presets[i].first, presets[i].second));
  return out;
}

AnnotatedImage apply_domain_shift(const AnnotatedImage& img, const DomainSpec& d) {
  AnnotatedImage out = img;
  out.domain = d.name;
  if (d.transform_chain.empty()) return out;
  for (std::size_t i = 0; i < d.transform_chain.size(); ++i) {
    const auto& t = d.transform_chain[i];
    check_kind(t.kind);
    if (t.kind == "palette") {
      palette(out.image, std::clamp(t.param("strength", 0.8), 0.0, 1.0));
    } else if (t.kind == "texture") {
      texture(out.image, std::clamp(t.param("strength", 0.3), 0.0, 1.0), t.param("period", 6.0));
    } else if (t.kind == "fog") {
      fog(out.image, std::clamp(t.param("density", 0.5), 0.0, 1.0));
    } else if (t.kind == "edge") {
      edge(out.image, std::clamp(t.param("strength", 0.7), 0.0, 1.0));
    } else if (t.kind == "noise") {
      Rng rng(derive_seed(hash_string(img.id), "domain-noise:" + d.name, i));
      noise(out.image, std::max(0.0, t.param("sigma", 0.03)), rng);
    }
    quantize(out.image);
  }
  return out;
}

}  // namespace oshot::synth
