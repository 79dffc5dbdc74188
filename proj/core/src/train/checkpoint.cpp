#include "oshot/train/checkpoint.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include "json.hpp"

#include "oshot/common/errors.h"
#include "oshot/common/hash.h"

namespace oshot::train {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr char kMagic[8] = {'O', 'S', 'H', 'O', 'T', 'C', 'K', '1'};

std::string dtype_name(torch::ScalarType t) {
  if (t == torch::kFloat64) return "float64";
  if (t == torch::kFloat32) return "float32";
  throw std::invalid_argument("checkpoint: unsupported dtype");
}

torch::ScalarType dtype_from(const std::string& s) {
  if (s == "float64") return torch::kFloat64;
  if (s == "float32") return torch::kFloat32;
  throw MissingInput("checkpoint: unknown dtype " + s);
}

std::string config_text(const Checkpoint& c) {
  KeyValueConfig kv;
  c.config.write(kv);
  c.detector.write(kv);
  return kv.to_text();
}

json metric_json(double v) {
  return std::isfinite(v) ? json(v) : json(nullptr);
}

double metric_value(const json& j) {
  return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

}  // namespace

bool Checkpoint::trained(const std::string& group) const {
  return std::find(trained_groups.begin(), trained_groups.end(), group) != trained_groups.end();
}

std::string Checkpoint::config_hash() const { return sha1_hex(config_text(*this)); }

void Checkpoint::save(const fs::path& path) const {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  json manifest;
  manifest["format"] = 1;
  manifest["config"] = config_text(*this);
  manifest["config_hash"] = config_hash();
  manifest["seed"] = config.seed;
  manifest["variant"] = to_string(config.variant);
  manifest["epoch"] = epoch;
  manifest["trained_groups"] = trained_groups;
  json rows = json::array();
  for (const auto& m : metrics) {
    rows.push_back({{"epoch", m.epoch}, {"split", m.split}, {"L_d", metric_json(m.detection_loss)},
                    {"L_r", metric_json(m.rotation_loss)}, {"mAP", metric_json(m.map)}});
  }
  manifest["metrics"] = rows;

  std::string blob;
  json tensors = json::array();
  auto add_group = [&](const char* group, const det::ParamGroup& g) {
    for (std::size_t i = 0; i < g.size(); ++i) {
      const auto t = g.tensors()[i].detach().contiguous().cpu();
      const auto nbytes = static_cast<std::size_t>(t.numel() * t.element_size());
      tensors.push_back({{"name", g.names()[i]},
                         {"group", group},
                         {"dtype", dtype_name(t.scalar_type())},
                         {"shape", t.sizes().vec()},
                         {"offset", blob.size()},
                         {"nbytes", nbytes}});
      blob.append(static_cast<const char*>(t.data_ptr()), nbytes);
    }
  };
  add_group(kFeatureGroup, params.feature);
  add_group(kDetectionGroup, params.detection);
  add_group(kRotationGroup, params.rotation);
  manifest["tensors"] = tensors;

  const std::string text = manifest.dump();
  const std::uint64_t len = text.size();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
  out.write(kMagic, sizeof kMagic);
  out.write(reinterpret_cast<const char*>(&len), sizeof len);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
}

Checkpoint Checkpoint::load(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingInput("checkpoint not found: " + path.string());
  char magic[8];
  std::uint64_t len = 0;
  in.read(magic, sizeof magic);
  in.read(reinterpret_cast<char*>(&len), sizeof len);
  if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0) {
    throw MissingInput("not a checkpoint archive: " + path.string());
  }
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  std::string blob((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const auto manifest = json::parse(text);

  Checkpoint c;
  const auto kv = KeyValueConfig::parse(manifest.at("config").get<std::string>());
  c.config = TrainConfig::read(kv);
  c.detector = det::DetectorConfig::read(kv);
  c.epoch = manifest.at("epoch").get<int>();
  c.trained_groups = manifest.at("trained_groups").get<std::vector<std::string>>();
  for (const auto& m : manifest.at("metrics")) {
    c.metrics.push_back({m.at("epoch").get<int>(), m.at("split").get<std::string>(),
                         metric_value(m.at("L_d")), metric_value(m.at("L_r")),
                         metric_value(m.at("mAP"))});
  }
  for (const auto& t : manifest.at("tensors")) {
    const auto offset = t.at("offset").get<std::size_t>();
    const auto nbytes = t.at("nbytes").get<std::size_t>();
    if (offset + nbytes > blob.size()) throw MissingInput("checkpoint truncated: " + path.string());
    auto shape = t.at("shape").get<std::vector<std::int64_t>>();
    auto value = torch::empty(shape, torch::TensorOptions().dtype(dtype_from(t.at("dtype"))));
    std::memcpy(value.data_ptr(), blob.data() + offset, nbytes);
    value.set_requires_grad(true);
    const auto group = t.at("group").get<std::string>();
    auto name = t.at("name").get<std::string>();
    if (group == kFeatureGroup) {
      c.params.feature.add(std::move(name), value);
    } else if (group == kDetectionGroup) {
      c.params.detection.add(std::move(name), value);
    } else if (group == kRotationGroup) {
      c.params.rotation.add(std::move(name), value);
    } else {
      throw MissingInput("checkpoint: unknown group " + group);
    }
  }
  if (c.params.feature.empty()) throw MissingInput("checkpoint lacks parameter group theta_f");
  if (c.params.detection.empty()) throw MissingInput("checkpoint lacks parameter group theta_d");
  if (c.params.rotation.empty()) throw MissingInput("checkpoint lacks parameter group theta_r");
  return c;
}

void write_metric_log(const fs::path& path, const std::vector<MetricRow>& rows) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  out << "epoch,split,L_d,L_r,mAP\n";
  out.precision(10);
  for (const auto& r : rows) {
    out << r.epoch << "," << r.split << "," << r.detection_loss << "," << r.rotation_loss << ","
        << r.map << "\n";
  }
}

}  // namespace oshot::train
