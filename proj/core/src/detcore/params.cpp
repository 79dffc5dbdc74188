#include "oshot/detcore/params.h"

#include <cmath>
#include <cstring>
#include <sstream>
#include <stdexcept>

#include "oshot/common/errors.h"
#include "oshot/common/rng.h"

namespace oshot::det {

void ParamGroup::add(std::string name, torch::Tensor value) {
  if (contains(name)) throw std::invalid_argument("duplicate parameter " + name);
  names_.push_back(std::move(name));
  values_.push_back(std::move(value));
}

const torch::Tensor& ParamGroup::at(std::string_view name) const {
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (names_[i] == name) return values_[i];
  }
  throw std::out_of_range("no parameter named " + std::string(name));
}

bool ParamGroup::contains(std::string_view name) const {
  for (const auto& n : names_) {
    if (n == name) return true;
  }
  return false;
}

std::int64_t ParamGroup::numel() const {
  std::int64_t n = 0;
  for (const auto& v : values_) n += v.numel();
  return n;
}

ParamGroup ParamGroup::with_values(std::vector<torch::Tensor> values) const {
  if (values.size() != values_.size()) {
    throw std::invalid_argument("with_values: size mismatch");
  }
  ParamGroup out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!values[i].sizes().equals(values_[i].sizes())) {
      throw std::invalid_argument("with_values: shape mismatch for " + names_[i]);
    }
    out.names_.push_back(names_[i]);
    out.values_.push_back(std::move(values[i]));
  }
  return out;
}

ParamGroup ParamGroup::clone(bool requires_grad) const {
  ParamGroup out;
  out.names_ = names_;
  for (const auto& v : values_) {
    out.values_.push_back(v.detach().clone().set_requires_grad(requires_grad));
  }
  return out;
}

ParamGroup ParamGroup::to(torch::Dtype dtype) const {
  ParamGroup out;
  out.names_ = names_;
  for (const auto& v : values_) {
    out.values_.push_back(v.detach().to(dtype).clone().set_requires_grad(v.requires_grad()));
  }
  return out;
}

bool ParamGroup::identical(const ParamGroup& other) const {
  if (names_ != other.names_) return false;
  for (std::size_t i = 0; i < values_.size(); ++i) {
    const auto a = values_[i].detach().contiguous();
    const auto b = other.values_[i].detach().contiguous();
    if (a.scalar_type() != b.scalar_type() || !a.sizes().equals(b.sizes())) return false;
    if (std::memcmp(a.data_ptr(), b.data_ptr(), a.numel() * a.element_size()) != 0) return false;
  }
  return true;
}

ModelParams ModelParams::clone(bool requires_grad) const {
  return {feature.clone(requires_grad), detection.clone(requires_grad),
          rotation.clone(requires_grad)};
}

int DetectorConfig::feature_stride() const {
  int s = 1;
  for (int v : strides) s *= v;
  return s;
}

void DetectorConfig::validate() const {
  if (channels.empty() || channels.size() != strides.size()) {
    throw ConfigError("detector: channels and strides must be non-empty and equally long");
  }
  for (int c : channels) {
    if (c <= 0 || (norm_groups > 0 && c % norm_groups != 0)) {
      throw ConfigError("detector: channel counts must be positive multiples of norm_groups");
    }
  }
  for (int s : strides) {
    if (s != 1 && s != 2) throw ConfigError("detector: strides must be 1 or 2");
  }
  if (num_classes < 1) throw ConfigError("detector: num_classes must be >= 1");
  if (anchor_scales.empty() || anchor_ratios.empty()) {
    throw ConfigError("detector: anchors need at least one scale and one ratio");
  }
  if (pool_size < 1) throw ConfigError("detector: pool_size must be >= 1");
  if (dtype != torch::kFloat32 && dtype != torch::kFloat64) {
    throw ConfigError("detector: dtype must be float32 or float64");
  }
}

namespace {

template <typename T>
std::string join(const std::vector<T>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    std::ostringstream os;
    os.precision(17);
    os << v[i];
    out += os.str();
  }
  return out;
}

std::vector<int> to_ints(const std::vector<double>& v) {
  return {v.begin(), v.end()};
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

void DetectorConfig::write(KeyValueConfig& cfg) const {
  cfg.set("det.num_classes", std::to_string(num_classes));
  cfg.set("det.channels", join(channels));
  cfg.set("det.strides", join(strides));
  cfg.set("det.norm_groups", std::to_string(norm_groups));
  cfg.set("det.linear", linear ? "true" : "false");
  cfg.set("det.rpn_channels", std::to_string(rpn_channels));
  cfg.set("det.anchor_scales", join(anchor_scales));
  cfg.set("det.anchor_ratios", join(anchor_ratios));
  cfg.set("det.pool_size", std::to_string(pool_size));
  cfg.set("det.roi_hidden", std::to_string(roi_hidden));
  cfg.set("det.pre_nms_top_n", std::to_string(pre_nms_top_n));
  cfg.set("det.post_nms_train", std::to_string(post_nms_train));
  cfg.set("det.post_nms_eval", std::to_string(post_nms_eval));
  cfg.set("det.rpn_nms_iou", fmt(rpn_nms_iou));
  cfg.set("det.roi_nms_iou", fmt(roi_nms_iou));
  cfg.set("det.rpn_positive_iou", fmt(rpn_positive_iou));
  cfg.set("det.rpn_negative_iou", fmt(rpn_negative_iou));
  cfg.set("det.roi_positive_iou", fmt(roi_positive_iou));
  cfg.set("det.eval_score_threshold", fmt(eval_score_threshold));
  cfg.set("det.pseudo_score_threshold", fmt(pseudo_score_threshold));
  cfg.set("det.smooth_l1_beta", fmt(smooth_l1_beta));
  cfg.set("det.dtype", dtype == torch::kFloat64 ? "float64" : "float32");
}

DetectorConfig DetectorConfig::read(const KeyValueConfig& cfg) {
  DetectorConfig d;
  d.num_classes = static_cast<int>(cfg.get_int("det.num_classes", d.num_classes));
  d.channels = to_ints(cfg.get_doubles("det.channels", {d.channels.begin(), d.channels.end()}));
  d.strides = to_ints(cfg.get_doubles("det.strides", {d.strides.begin(), d.strides.end()}));
  d.norm_groups = static_cast<int>(cfg.get_int("det.norm_groups", d.norm_groups));
  d.linear = cfg.get_bool("det.linear", d.linear);
  d.rpn_channels = static_cast<int>(cfg.get_int("det.rpn_channels", d.rpn_channels));
  d.anchor_scales = cfg.get_doubles("det.anchor_scales", d.anchor_scales);
  d.anchor_ratios = cfg.get_doubles("det.anchor_ratios", d.anchor_ratios);
  d.pool_size = static_cast<int>(cfg.get_int("det.pool_size", d.pool_size));
  d.roi_hidden = static_cast<int>(cfg.get_int("det.roi_hidden", d.roi_hidden));
  d.pre_nms_top_n = static_cast<int>(cfg.get_int("det.pre_nms_top_n", d.pre_nms_top_n));
  d.post_nms_train = static_cast<int>(cfg.get_int("det.post_nms_train", d.post_nms_train));
  d.post_nms_eval = static_cast<int>(cfg.get_int("det.post_nms_eval", d.post_nms_eval));
  d.rpn_nms_iou = cfg.get_double("det.rpn_nms_iou", d.rpn_nms_iou);
  d.roi_nms_iou = cfg.get_double("det.roi_nms_iou", d.roi_nms_iou);
  d.rpn_positive_iou = cfg.get_double("det.rpn_positive_iou", d.rpn_positive_iou);
  d.rpn_negative_iou = cfg.get_double("det.rpn_negative_iou", d.rpn_negative_iou);
  d.roi_positive_iou = cfg.get_double("det.roi_positive_iou", d.roi_positive_iou);
  d.eval_score_threshold = cfg.get_double("det.eval_score_threshold", d.eval_score_threshold);
  d.pseudo_score_threshold =
      cfg.get_double("det.pseudo_score_threshold", d.pseudo_score_threshold);
  d.smooth_l1_beta = cfg.get_double("det.smooth_l1_beta", d.smooth_l1_beta);
  const auto dtype = cfg.get_string("det.dtype", "float32");
  if (dtype == "float64") {
    d.dtype = torch::kFloat64;
  } else if (dtype == "float32") {
    d.dtype = torch::kFloat32;
  } else {
    throw ConfigError("det.dtype must be float32 or float64");
  }
  d.validate();
  return d;
}

namespace {

torch::Tensor normal_tensor(Rng& rng, std::vector<std::int64_t> shape, double stddev,
                            torch::Dtype dtype) {
  auto t = torch::empty(shape, torch::kFloat64);
  auto* p = t.data_ptr<double>();
  for (std::int64_t i = 0; i < t.numel(); ++i) p[i] = normal(rng, 0.0, stddev);
  return t.to(dtype).set_requires_grad(true);
}

torch::Tensor filled(std::vector<std::int64_t> shape, double value, torch::Dtype dtype) {
  return torch::full(shape, value, torch::TensorOptions().dtype(dtype)).set_requires_grad(true);
}

}  // namespace

ModelParams init_params(const DetectorConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Rng rng = make_rng(seed, "init");
  const auto dt = cfg.dtype;
  ModelParams p;

  int in_ch = 3;
  for (std::size_t i = 0; i < cfg.channels.size(); ++i) {
    const int out_ch = cfg.channels[i];
    const std::string prefix = "backbone.conv" + std::to_string(i);
    p.feature.add(prefix + ".weight",
                  normal_tensor(rng, {out_ch, in_ch, 3, 3}, std::sqrt(2.0 / (9.0 * in_ch)), dt));
    p.feature.add(prefix + ".bias", filled({out_ch}, 0.0, dt));
    if (cfg.norm_groups > 0) {
      const std::string norm = "backbone.norm" + std::to_string(i);
      p.feature.add(norm + ".gamma", filled({out_ch}, 1.0, dt));
      p.feature.add(norm + ".beta", filled({out_ch}, 0.0, dt));
    }
    in_ch = out_ch;
  }

  const int c = cfg.feature_channels();
  const int a = cfg.anchors_per_cell();
  const int r = cfg.rpn_channels;
  p.detection.add("rpn.conv.weight", normal_tensor(rng, {r, c, 3, 3}, std::sqrt(2.0 / (9.0 * c)), dt));
  p.detection.add("rpn.conv.bias", filled({r}, 0.0, dt));
  p.detection.add("rpn.objectness.weight", normal_tensor(rng, {a, r, 1, 1}, 0.01, dt));
  p.detection.add("rpn.objectness.bias", filled({a}, 0.0, dt));
  p.detection.add("rpn.deltas.weight", normal_tensor(rng, {4 * a, r, 1, 1}, 0.01, dt));
  p.detection.add("rpn.deltas.bias", filled({4 * a}, 0.0, dt));

  const int pooled = c * cfg.pool_size * cfg.pool_size;
  p.detection.add("roi.fc.weight",
                  normal_tensor(rng, {cfg.roi_hidden, pooled}, std::sqrt(2.0 / pooled), dt));
  p.detection.add("roi.fc.bias", filled({cfg.roi_hidden}, 0.0, dt));
  p.detection.add("roi.cls.weight", normal_tensor(rng, {cfg.num_classes + 1, cfg.roi_hidden}, 0.01, dt));
  p.detection.add("roi.cls.bias", filled({cfg.num_classes + 1}, 0.0, dt));
  p.detection.add("roi.box.weight", normal_tensor(rng, {4, cfg.roi_hidden}, 0.001, dt));
  p.detection.add("roi.box.bias", filled({4}, 0.0, dt));

  p.rotation.add("rot.fc.weight", filled({4, pooled}, 0.0, dt));
  p.rotation.add("rot.fc.bias", filled({4}, 0.0, dt));
  return p;
}

}  // namespace oshot::det
