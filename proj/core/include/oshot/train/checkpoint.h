#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "oshot/detcore/params.h"
#include "oshot/train/config.h"

namespace oshot::train {

struct MetricRow {
  int epoch = 0;
  std::string split;
  double detection_loss = 0.0;
  double rotation_loss = 0.0;
  double map = 0.0;  // NaN when not evaluated that epoch
};

// Group names as they appear in the archive manifest.
inline constexpr const char* kFeatureGroup = "theta_f";
inline constexpr const char* kDetectionGroup = "theta_d";
inline constexpr const char* kRotationGroup = "theta_r";

struct Checkpoint {
  det::ModelParams params;
  det::DetectorConfig detector;
  TrainConfig config;
  int epoch = 0;
  std::vector<MetricRow> metrics;
  // Groups that were optimized at some stage; baseline variants never train
  // theta_r.
  std::vector<std::string> trained_groups;

  bool trained(const std::string& group) const;
  // Hash of the canonical config text (training + detector keys).
  std::string config_hash() const;

  // Archive: 8-byte magic, u64 manifest length, JSON manifest (tensor names,
  // groups, dtypes, shapes, offsets, config, config hash, seed), raw
  // little-endian tensor data.
  void save(const std::filesystem::path& path) const;
  // Throws MissingInput when the file is missing or a parameter group is
  // absent (the message names the group).
  static Checkpoint load(const std::filesystem::path& path);
};

// Metric log CSV: epoch,split,L_d,L_r,mAP
void write_metric_log(const std::filesystem::path& path, const std::vector<MetricRow>& rows);

}  // namespace oshot::train
