#pragma once

#include <map>
#include <string>
#include <vector>

#include "oshot/synthgen/image.h"

namespace oshot::synth {

// One shift transform. Kinds and their parameters:
//   palette  strength in [0,1]   channel rotation blended with a tint
//   texture  strength in [0,1], period (px)   stripe overlay
//   fog      density in [0,1]    blend toward the fog colour
//   edge     strength in [0,1]   dark outlines + posterization
//   noise    sigma               additive gaussian noise
struct ShiftTransform {
  std::string kind;
  std::map<std::string, double> params;

  double param(const std::string& key, double fallback) const;
};

struct DomainSpec {
  std::string name = "source";
  std::vector<ShiftTransform> transform_chain;

  // Parses "fog:density=0.5;noise:sigma=0.03". An empty string is the
  // identity chain. Throws ConfigError on unknown kinds or malformed text.
  static DomainSpec parse(const std::string& name, const std::string& chain);
  std::string chain_string() const;
};

// Built-in shifted target domains, in order; the first `count` are used
// when a dataset asks for `count` targets (1..8).
std::vector<DomainSpec> default_target_domains(int count);

// Labels are copied untouched; pixels change per transform. Deterministic in
// (img, d): noise is seeded from the image id and the domain name. Throws
// ConfigError on unknown transform kinds.
AnnotatedImage apply_domain_shift(const AnnotatedImage& img, const DomainSpec& d);

}  // namespace oshot::synth
