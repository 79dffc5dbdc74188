#include "oshot/synthgen/dataset_io.h"

#include <png.h>

#include <cmath>
#include <fstream>
#include <mutex>
#include <thread>

#include "json.hpp"

#include "oshot/common/errors.h"
#include "oshot/common/rng.h"

namespace oshot::synth {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::mutex& audit_mutex() {
  static std::mutex m;
  return m;
}

std::vector<fs::path>& audit_log() {
  static std::vector<fs::path> log;
  return log;
}

}  // namespace

void ReadAudit::clear() {
  std::lock_guard lock(audit_mutex());
  audit_log().clear();
}

std::vector<fs::path> ReadAudit::paths() {
  std::lock_guard lock(audit_mutex());
  return audit_log();
}

void ReadAudit::record(const fs::path& p) {
  std::lock_guard lock(audit_mutex());
  audit_log().push_back(p);
}

void write_png(const fs::path& path, const Image& img) {
  png_image desc{};
  desc.version = PNG_IMAGE_VERSION;
  desc.width = static_cast<png_uint_32>(img.width());
  desc.height = static_cast<png_uint_32>(img.height());
  desc.format = PNG_FORMAT_RGB;
  std::vector<png_byte> buf(img.pixels().size());
  for (std::size_t i = 0; i < buf.size(); ++i) {
    buf[i] = static_cast<png_byte>(std::lround(std::clamp(img.pixels()[i], 0.0f, 1.0f) * 255.0f));
  }
  if (!png_image_write_to_file(&desc, path.c_str(), 0, buf.data(), 0, nullptr)) {
    throw std::runtime_error("failed to write PNG " + path.string() + ": " + desc.message);
  }
}

Image read_png(const fs::path& path) {
  ReadAudit::record(path);
  png_image desc{};
  desc.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&desc, path.c_str())) {
    throw MissingInput("cannot read PNG " + path.string() + ": " + desc.message);
  }
  desc.format = PNG_FORMAT_RGB;
  std::vector<png_byte> buf(PNG_IMAGE_SIZE(desc));
  if (!png_image_finish_read(&desc, nullptr, buf.data(), 0, nullptr)) {
    throw MissingInput("cannot decode PNG " + path.string() + ": " + desc.message);
  }
  Image img(static_cast<int>(desc.width), static_cast<int>(desc.height));
  for (std::size_t i = 0; i < buf.size(); ++i) img.pixels()[i] = buf[i] / 255.0f;
  return img;
}

std::vector<AnnotatedImage> generate_split(const SceneSpec& spec, const DomainSpec& domain,
                                           const std::string& split_name, int count,
                                           std::uint64_t root_seed, int threads) {
  std::vector<AnnotatedImage> out(count);
  auto work = [&](int begin, int end) {
    for (int i = begin; i < end; ++i) {
      auto scene = generate_scene(spec, derive_seed(root_seed, "data:" + split_name, i));
      scene.id = split_name + "-" + std::to_string(i);
      out[i] = apply_domain_shift(scene, domain);
    }
  };
  threads = std::max(1, std::min(threads, count));
  if (threads == 1) {
    work(0, count);
  } else {
    std::vector<std::jthread> pool;
    const int chunk = (count + threads - 1) / threads;
    for (int t = 0; t < threads; ++t) {
      pool.emplace_back(work, t * chunk, std::min(count, (t + 1) * chunk));
    }
  }
  return out;
}

std::string serialize_labels(const std::vector<BoxLabel>& labels) {
  json arr = json::array();
  for (const auto& l : labels) {
    arr.push_back({{"class", l.class_id}, {"x1", l.box.x1}, {"y1", l.box.y1},
                   {"x2", l.box.x2}, {"y2", l.box.y2}});
  }
  return arr.dump();
}

void write_dataset(const fs::path& dir, const std::vector<AnnotatedImage>& images,
                   const std::string& meta_text) {
  fs::create_directories(dir);
  std::ofstream ann(dir / "annotations.jsonl");
  for (const auto& img : images) {
    const std::string file = img.id + ".png";
    write_png(dir / file, img.image);
    json rec{{"id", img.id},
             {"file", file},
             {"width", img.image.width()},
             {"height", img.image.height()},
             {"domain", img.domain},
             {"labels", json::parse(serialize_labels(img.labels))}};
    ann << rec.dump() << "\n";
  }
  std::ofstream(dir / "dataset.meta") << meta_text;
}

std::vector<AnnotatedImage> read_dataset(const fs::path& dir) {
  const auto ann_path = dir / "annotations.jsonl";
  if (!fs::is_directory(dir) || !fs::exists(ann_path)) {
    throw MissingInput("dataset not found at " + dir.string());
  }
  ReadAudit::record(ann_path);
  std::ifstream in(ann_path);
  std::vector<AnnotatedImage> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto rec = json::parse(line);
    AnnotatedImage img;
    img.id = rec.at("id").get<std::string>();
    img.domain = rec.value("domain", dir.filename().string());
    img.image = read_png(dir / rec.at("file").get<std::string>());
    for (const auto& l : rec.at("labels")) {
      img.labels.push_back({l.at("class").get<int>(),
                            Box{l.at("x1").get<double>(), l.at("y1").get<double>(),
                                l.at("x2").get<double>(), l.at("y2").get<double>()}});
    }
    out.push_back(std::move(img));
  }
  return out;
}

}  // namespace oshot::synth
