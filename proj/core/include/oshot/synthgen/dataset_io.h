#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "oshot/synthgen/domain.h"
#include "oshot/synthgen/scene.h"

namespace oshot::synth {

// Lossless 8-bit RGB PNG. Images must already be quantized for a
// bit-exact round trip.
void write_png(const std::filesystem::path& path, const Image& img);
Image read_png(const std::filesystem::path& path);

// `count` scenes for split `split_name`, each seeded from (root_seed,
// split_name, index) and passed through `domain`. Ids are
// "<split_name>-<index>".
std::vector<AnnotatedImage> generate_split(const SceneSpec& spec, const DomainSpec& domain,
                                           const std::string& split_name, int count,
                                           std::uint64_t root_seed, int threads = 1);

// Writes <dir>/<id>.png, <dir>/annotations.jsonl and <dir>/dataset.meta.
void write_dataset(const std::filesystem::path& dir, const std::vector<AnnotatedImage>& images,
                   const std::string& meta_text);
// Throws MissingInput when the directory or annotation file is absent.
std::vector<AnnotatedImage> read_dataset(const std::filesystem::path& dir);

std::string serialize_labels(const std::vector<BoxLabel>& labels);

// Every dataset file opened by read_dataset/read_png is recorded here, so
// tests can audit which data a command touched.
class ReadAudit {
 public:
  static void clear();
  static std::vector<std::filesystem::path> paths();
  static void record(const std::filesystem::path& p);
};

}  // namespace oshot::synth
