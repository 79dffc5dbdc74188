#include "oshot/detcore/detector.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>

#include "oshot/common/errors.h"
#include "oshot/detcore/box.h"
#include "oshot/detcore/pooling.h"

namespace oshot::det {

namespace {

constexpr std::array<double, 4> kRpnWeights{1.0, 1.0, 1.0, 1.0};
constexpr std::array<double, 4> kRoiWeights{10.0, 10.0, 5.0, 5.0};

torch::Tensor activation(const torch::Tensor& x, const DetectorConfig& cfg) {
  return cfg.linear ? x : torch::relu(x);
}

// GroupNorm written with elementary ops so it is differentiable to any order.
torch::Tensor group_norm(const torch::Tensor& x, int groups, const torch::Tensor& gamma,
                         const torch::Tensor& beta) {
  const auto n = x.size(0), c = x.size(1), h = x.size(2), w = x.size(3);
  auto g = x.reshape({n, groups, -1});
  auto mean = g.mean(-1, true);
  auto centered = g - mean;
  auto var = (centered * centered).mean(-1, true);
  auto normed = (centered / torch::sqrt(var + 1e-5)).reshape({n, c, h, w});
  return normed * gamma.view({1, c, 1, 1}) + beta.view({1, c, 1, 1});
}

torch::Tensor linear(const torch::Tensor& x, const torch::Tensor& w, const torch::Tensor& b) {
  return torch::addmm(b, x, w.t());
}

// log(1 + e^x) - t x, stable.
torch::Tensor bce_with_logits(const torch::Tensor& x, const torch::Tensor& t) {
  return torch::log1p(torch::exp(-x.abs())) + x.clamp_min(0) - x * t;
}

torch::Tensor smooth_l1(const torch::Tensor& diff, double beta) {
  auto d = diff.abs();
  return torch::where(d < beta, 0.5 * d * d / beta, d - 0.5 * beta);
}

std::vector<std::vector<double>> iou_matrix(const std::vector<Box>& a, const std::vector<Box>& b) {
  std::vector<std::vector<double>> m(a.size(), std::vector<double>(b.size()));
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j) m[i][j] = iou(a[i], b[j]);
  return m;
}

torch::Tensor scalar_zero(const torch::Tensor& like) {
  return torch::zeros({}, like.options());
}

void check_finite(const torch::Tensor& t, const char* what) {
  if (!std::isfinite(t.item<double>())) {
    throw TrainingFault(std::string("non-finite ") + what + " in detection loss");
  }
}

}  // namespace

torch::Tensor to_tensor(const synth::Image& img, torch::Dtype dtype) {
  auto t = torch::from_blob(const_cast<float*>(img.pixels().data()),
                            {img.height(), img.width(), synth::Image::kChannels},
                            torch::kFloat32);
  return t.permute({2, 0, 1}).to(dtype).contiguous();
}

torch::Tensor backbone(const torch::Tensor& images, const ParamGroup& feature,
                       const DetectorConfig& cfg) {
  if (images.dim() != 4 || images.size(1) != 3) {
    throw std::invalid_argument("backbone expects N x 3 x H x W input");
  }
  const int stride = cfg.feature_stride();
  if (images.size(2) % stride != 0 || images.size(3) % stride != 0) {
    throw std::invalid_argument("input dimensions must be multiples of the feature stride " +
                                std::to_string(stride));
  }
  auto x = images;
  for (std::size_t i = 0; i < cfg.channels.size(); ++i) {
    const std::string prefix = "backbone.conv" + std::to_string(i);
    x = torch::conv2d(x, feature.at(prefix + ".weight"), feature.at(prefix + ".bias"),
                      cfg.strides[i], 1);
    if (cfg.norm_groups > 0) {
      const std::string norm = "backbone.norm" + std::to_string(i);
      x = group_norm(x, cfg.norm_groups, feature.at(norm + ".gamma"), feature.at(norm + ".beta"));
    }
    x = activation(x, cfg);
  }
  return x;
}

FeatureMap feature_map_of(const torch::Tensor& maps, int index, int source_width,
                          int source_height, const DetectorConfig& cfg) {
  return {maps[index], cfg.feature_stride(), source_width, source_height};
}

FeatureMap extract_features(const torch::Tensor& image, const ParamGroup& feature,
                            const DetectorConfig& cfg) {
  if (image.dim() != 3) throw std::invalid_argument("extract_features expects 3 x H x W");
  auto maps = backbone(image.unsqueeze(0), feature, cfg);
  return feature_map_of(maps, 0, static_cast<int>(image.size(2)), static_cast<int>(image.size(1)),
                        cfg);
}

std::vector<Box> make_anchors(int map_width, int map_height, const DetectorConfig& cfg) {
  const double stride = cfg.feature_stride();
  std::vector<Box> out;
  out.reserve(static_cast<std::size_t>(map_width) * map_height * cfg.anchors_per_cell());
  for (int y = 0; y < map_height; ++y) {
    for (int x = 0; x < map_width; ++x) {
      const double cx = (x + 0.5) * stride;
      const double cy = (y + 0.5) * stride;
      for (double scale : cfg.anchor_scales) {
        for (double ratio : cfg.anchor_ratios) {
          const double w = scale / std::sqrt(ratio);
          const double h = scale * std::sqrt(ratio);
          out.push_back({cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h});
        }
      }
    }
  }
  return out;
}

RpnOutput rpn_forward(const FeatureMap& fmap, const ParamGroup& d, const DetectorConfig& cfg) {
  const int a = cfg.anchors_per_cell();
  auto x = fmap.values.unsqueeze(0);
  auto t = activation(torch::conv2d(x, d.at("rpn.conv.weight"), d.at("rpn.conv.bias"), 1, 1), cfg);
  auto obj = torch::conv2d(t, d.at("rpn.objectness.weight"), d.at("rpn.objectness.bias"));
  auto del = torch::conv2d(t, d.at("rpn.deltas.weight"), d.at("rpn.deltas.bias"));
  const auto h = fmap.height(), w = fmap.width();
  RpnOutput out;
  out.objectness = obj[0].permute({1, 2, 0}).reshape({-1});
  out.deltas = del[0].view({a, 4, h, w}).permute({2, 3, 0, 1}).reshape({-1, 4});
  return out;
}

std::vector<Proposal> proposals_from(const RpnOutput& rpn, const FeatureMap& fmap,
                                     const DetectorConfig& cfg, Mode mode) {
  torch::NoGradGuard no_grad;
  const auto anchors = make_anchors(fmap.width(), fmap.height(), cfg);
  auto scores = torch::sigmoid(rpn.objectness.detach()).to(torch::kFloat64).contiguous();
  auto deltas = rpn.deltas.detach().to(torch::kFloat64).contiguous();
  const auto* sp = scores.data_ptr<double>();
  const auto* dp = deltas.data_ptr<double>();
  const double w = fmap.source_width, h = fmap.source_height;

  std::vector<int> order(anchors.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return sp[a] > sp[b]; });
  if (static_cast<int>(order.size()) > cfg.pre_nms_top_n) order.resize(cfg.pre_nms_top_n);

  std::vector<Box> boxes;
  std::vector<double> obj;
  for (int i : order) {
    const std::array<double, 4> d{dp[4 * i], dp[4 * i + 1], dp[4 * i + 2], dp[4 * i + 3]};
    const Box b = clip_box(decode_box(d, anchors[i], kRpnWeights), w, h);
    if (b.width() < 1.0 || b.height() < 1.0) continue;
    boxes.push_back(b);
    obj.push_back(sp[i]);
  }
  const auto keep = nms(boxes, obj, cfg.rpn_nms_iou);
  const int limit = mode == Mode::kTrain ? cfg.post_nms_train : cfg.post_nms_eval;
  std::vector<Proposal> out;
  for (int k : keep) {
    if (static_cast<int>(out.size()) >= limit) break;
    out.push_back({boxes[k], obj[k]});
  }
  return out;
}

std::vector<Proposal> propose_regions(const FeatureMap& fmap, const ParamGroup& detection,
                                      const DetectorConfig& cfg, Mode mode) {
  torch::NoGradGuard no_grad;
  return proposals_from(rpn_forward(fmap, detection, cfg), fmap, cfg, mode);
}

RoiOutput roi_forward(const FeatureMap& fmap, const std::vector<Box>& rois,
                      const ParamGroup& d, const DetectorConfig& cfg) {
  std::vector<CellRange> ranges;
  ranges.reserve(rois.size());
  const CellRange full{0, 0, fmap.width(), fmap.height()};
  for (const auto& b : rois) {
    ranges.push_back(box_to_cells(b, fmap.stride, fmap.width(), fmap.height()).value_or(full));
  }
  auto pooled = pool_cells(fmap.values, ranges, cfg.pool_size).flatten(1);
  auto hidden = activation(linear(pooled, d.at("roi.fc.weight"), d.at("roi.fc.bias")), cfg);
  return {linear(hidden, d.at("roi.cls.weight"), d.at("roi.cls.bias")),
          linear(hidden, d.at("roi.box.weight"), d.at("roi.box.bias"))};
}

std::vector<Detection> roi_classify(const FeatureMap& fmap, const std::vector<Proposal>& proposals,
                                    const ParamGroup& detection, const DetectorConfig& cfg,
                                    double score_threshold) {
  if (proposals.empty()) return {};
  torch::NoGradGuard no_grad;
  std::vector<Box> rois;
  for (const auto& p : proposals) rois.push_back(p.box);
  const auto out = roi_forward(fmap, rois, detection, cfg);
  auto probs = torch::softmax(out.class_logits, 1).to(torch::kFloat64).contiguous();
  auto deltas = out.box_deltas.to(torch::kFloat64).contiguous();
  const auto pa = probs.accessor<double, 2>();
  const auto da = deltas.accessor<double, 2>();

  std::map<int, std::pair<std::vector<Box>, std::vector<double>>> per_class;
  for (std::size_t r = 0; r < rois.size(); ++r) {
    int best = 0;
    for (int k = 1; k <= cfg.num_classes; ++k) {
      if (pa[r][k] > pa[r][best]) best = k;
    }
    if (best == 0) continue;
    const std::array<double, 4> d{da[r][0], da[r][1], da[r][2], da[r][3]};
    const Box b = clip_box(decode_box(d, rois[r], kRoiWeights), fmap.source_width,
                           fmap.source_height);
    if (b.width() <= 0.0 || b.height() <= 0.0) continue;
    per_class[best - 1].first.push_back(b);
    per_class[best - 1].second.push_back(pa[r][best]);
  }
  std::vector<Detection> dets;
  for (const auto& [cls, bs] : per_class) {
    for (int k : nms(bs.first, bs.second, cfg.roi_nms_iou)) {
      if (bs.second[k] >= score_threshold) dets.push_back({cls, bs.first[k], bs.second[k]});
    }
  }
  std::stable_sort(dets.begin(), dets.end(),
                   [](const Detection& a, const Detection& b) { return a.score > b.score; });
  return dets;
}

std::vector<Detection> detect(const torch::Tensor& image, const ParamGroup& feature,
                              const ParamGroup& detection, const DetectorConfig& cfg,
                              double score_threshold) {
  torch::NoGradGuard no_grad;
  const auto fmap = extract_features(image, feature, cfg);
  return roi_classify(fmap, propose_regions(fmap, detection, cfg, Mode::kEval), detection, cfg,
                      score_threshold);
}

DetectionLoss detection_loss(const FeatureMap& fmap, const std::vector<BoxLabel>& labels,
                             const ParamGroup& detection, const DetectorConfig& cfg,
                             const std::vector<Box>* proposals_override) {
  const auto opts = fmap.values.options();
  const auto rpn = rpn_forward(fmap, detection, cfg);
  const auto anchors = make_anchors(fmap.width(), fmap.height(), cfg);
  std::vector<Box> gts;
  for (const auto& l : labels) gts.push_back(l.box);

  // Anchor assignment: IoU >= positive threshold, plus the best anchor(s) of
  // each ground truth; below negative threshold is background; rest ignored.
  const auto na = static_cast<std::int64_t>(anchors.size());
  std::vector<int> anchor_label(na, 0);
  std::vector<int> anchor_gt(na, -1);
  if (!gts.empty()) {
    const auto m = iou_matrix(anchors, gts);
    std::vector<double> best_for_gt(gts.size(), 0.0);
    for (std::int64_t i = 0; i < na; ++i) {
      int arg = 0;
      for (std::size_t j = 1; j < gts.size(); ++j) {
        if (m[i][j] > m[i][arg]) arg = static_cast<int>(j);
      }
      anchor_gt[i] = arg;
      const double best = m[i][arg];
      anchor_label[i] = best >= cfg.rpn_positive_iou ? 1 : (best < cfg.rpn_negative_iou ? 0 : -1);
      for (std::size_t j = 0; j < gts.size(); ++j) best_for_gt[j] = std::max(best_for_gt[j], m[i][j]);
    }
    for (std::int64_t i = 0; i < na; ++i) {
      for (std::size_t j = 0; j < gts.size(); ++j) {
        if (best_for_gt[j] > 0.0 && m[i][j] == best_for_gt[j]) {
          anchor_label[i] = 1;
          anchor_gt[i] = static_cast<int>(j);
        }
      }
    }
  }

  std::vector<std::int64_t> pos_idx, neg_idx;
  std::vector<double> pos_targets;
  for (std::int64_t i = 0; i < na; ++i) {
    if (anchor_label[i] == 1) {
      pos_idx.push_back(i);
      const auto t = encode_box(gts[anchor_gt[i]], anchors[i], kRpnWeights);
      pos_targets.insert(pos_targets.end(), t.begin(), t.end());
    } else if (anchor_label[i] == 0) {
      neg_idx.push_back(i);
    }
  }
  auto index_tensor = [](const std::vector<std::int64_t>& v) {
    return torch::tensor(v, torch::kInt64);
  };

  DetectionLoss loss;
  loss.rpn_objectness = scalar_zero(fmap.values);
  loss.rpn_box = scalar_zero(fmap.values);
  if (!pos_idx.empty()) {
    auto logits = rpn.objectness.index_select(0, index_tensor(pos_idx));
    loss.rpn_objectness = loss.rpn_objectness + bce_with_logits(logits, torch::ones_like(logits)).mean();
    auto pred = rpn.deltas.index_select(0, index_tensor(pos_idx));
    auto target = torch::tensor(pos_targets, opts).view({-1, 4});
    loss.rpn_box = smooth_l1(pred - target, cfg.smooth_l1_beta).sum() /
                   static_cast<double>(pos_idx.size());
  }
  if (!neg_idx.empty()) {
    auto logits = rpn.objectness.index_select(0, index_tensor(neg_idx));
    loss.rpn_objectness = loss.rpn_objectness + bce_with_logits(logits, torch::zeros_like(logits)).mean();
  }

  if (proposals_override) {
    loss.proposals = *proposals_override;
  } else {
    for (const auto& p : proposals_from(rpn, fmap, cfg, Mode::kTrain)) loss.proposals.push_back(p.box);
  }
  std::vector<Box> rois = loss.proposals;
  rois.insert(rois.end(), gts.begin(), gts.end());

  loss.roi_class = scalar_zero(fmap.values);
  loss.roi_box = scalar_zero(fmap.values);
  if (!rois.empty()) {
    std::vector<std::int64_t> cls_target(rois.size(), 0);
    std::vector<std::int64_t> fg_idx;
    std::vector<double> fg_targets;
    for (std::size_t r = 0; r < rois.size(); ++r) {
      int arg = -1;
      double best = 0.0;
      for (std::size_t j = 0; j < gts.size(); ++j) {
        const double v = iou(rois[r], gts[j]);
        if (v > best) { best = v; arg = static_cast<int>(j); }
      }
      if (arg >= 0 && best >= cfg.roi_positive_iou) {
        cls_target[r] = labels[arg].class_id + 1;
        fg_idx.push_back(static_cast<std::int64_t>(r));
        const auto t = encode_box(gts[arg], rois[r], kRoiWeights);
        fg_targets.insert(fg_targets.end(), t.begin(), t.end());
      }
    }
    const auto out = roi_forward(fmap, rois, detection, cfg);
    auto logp = torch::log_softmax(out.class_logits, 1);
    auto target = torch::tensor(cls_target, torch::kInt64).unsqueeze(1);
    loss.roi_class = -logp.gather(1, target).mean();
    if (!fg_idx.empty()) {
      auto pred = out.box_deltas.index_select(0, index_tensor(fg_idx));
      auto t = torch::tensor(fg_targets, opts).view({-1, 4});
      loss.roi_box = smooth_l1(pred - t, cfg.smooth_l1_beta).sum() / static_cast<double>(fg_idx.size());
    }
  }
  check_finite(loss.total().detach(), "value");
  return loss;
}

DetectionLoss detection_loss(const torch::Tensor& image, const std::vector<BoxLabel>& labels,
                             const ParamGroup& feature, const ParamGroup& detection,
                             const DetectorConfig& cfg, const std::vector<Box>* proposals_override) {
  return detection_loss(extract_features(image, feature, cfg), labels, detection, cfg,
                        proposals_override);
}

}  // namespace oshot::det
