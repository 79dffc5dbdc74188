#include "oshot/train/config.h"

#include <sstream>
#include <vector>

#include "oshot/common/errors.h"

namespace oshot::train {

std::string to_string(Variant v) {
  switch (v) {
    case Variant::kBaseline: return "baseline";
    case Variant::kTranBaseline: return "tran-baseline";
    case Variant::kOshot: return "oshot";
    case Variant::kTranOshot: return "tran-oshot";
    case Variant::kMetaOshot: return "meta-oshot";
    case Variant::kFullOshot: return "full-oshot";
  }
  return "unknown";
}

Variant variant_from_string(const std::string& s) {
  for (auto v : {Variant::kBaseline, Variant::kTranBaseline, Variant::kOshot, Variant::kTranOshot,
                 Variant::kMetaOshot, Variant::kFullOshot}) {
    if (to_string(v) == s) return v;
  }
  throw ConfigError("unknown variant `" + s + "`");
}

std::string to_string(MetaGradMode m) {
  return m == MetaGradMode::kExact ? "exact" : "first-order";
}

bool TrainConfig::trains_rotation() const {
  return variant != Variant::kBaseline && variant != Variant::kTranBaseline;
}

bool TrainConfig::uses_augmentation() const {
  return variant == Variant::kTranBaseline || variant == Variant::kTranOshot ||
         variant == Variant::kFullOshot;
}

bool TrainConfig::is_meta() const {
  return variant == Variant::kMetaOshot || variant == Variant::kFullOshot;
}

int TrainConfig::effective_k() const { return variant == Variant::kMetaOshot ? 1 : K; }

void TrainConfig::validate() const {
  std::vector<std::string> errors;
  if (K < 1) errors.push_back("K must be >= 1");
  if (K > 5) errors.push_back("K must be <= 5 (size of the augmentation catalogue)");
  if (is_meta() && eta < 1) errors.push_back("eta must be >= 1 for meta variants");
  if (eta < 0) errors.push_back("eta must be >= 0");
  if (lambda < 0.0) errors.push_back("lambda must be >= 0");
  if (inner_lr < 0.0) errors.push_back("inner_lr must be >= 0");
  if (outer_lr <= 0.0) errors.push_back("outer_lr must be > 0");
  if (lr <= 0.0) errors.push_back("lr must be > 0");
  if (epochs < 0) errors.push_back("epochs must be >= 0");
  if (batch_size < 1) errors.push_back("batch_size must be >= 1");
  if (meta_images < 0) errors.push_back("meta_images must be >= 0");
  if (optimizer != "adam" && optimizer != "sgd") errors.push_back("optimizer must be adam or sgd");
  if (!errors.empty()) {
    std::string msg = "invalid training configuration:";
    for (const auto& e : errors) msg += "\n  - " + e;
    throw ConfigError(msg);
  }
}

namespace {

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

void TrainConfig::write(KeyValueConfig& cfg) const {
  cfg.set("variant", to_string(variant));
  cfg.set("lambda", fmt(lambda));
  cfg.set("K", std::to_string(K));
  cfg.set("eta", std::to_string(eta));
  cfg.set("inner_lr", fmt(inner_lr));
  cfg.set("outer_lr", fmt(outer_lr));
  cfg.set("lr", fmt(lr));
  cfg.set("optimizer", optimizer);
  cfg.set("epochs", std::to_string(epochs));
  cfg.set("batch_size", std::to_string(batch_size));
  cfg.set("meta_images", std::to_string(meta_images));
  cfg.set("seed", std::to_string(seed));
  cfg.set("meta_grad_mode", to_string(meta_grad_mode));
}

TrainConfig TrainConfig::read(const KeyValueConfig& cfg) {
  TrainConfig t;
  t.variant = variant_from_string(cfg.get_string("variant", to_string(t.variant)));
  t.lambda = cfg.get_double("lambda", t.lambda);
  t.K = static_cast<int>(cfg.get_int("K", t.K));
  t.eta = static_cast<int>(cfg.get_int("eta", t.eta));
  t.inner_lr = cfg.get_double("inner_lr", t.inner_lr);
  t.outer_lr = cfg.get_double("outer_lr", t.outer_lr);
  t.lr = cfg.get_double("lr", t.lr);
  t.optimizer = cfg.get_string("optimizer", t.optimizer);
  t.epochs = static_cast<int>(cfg.get_int("epochs", t.epochs));
  t.batch_size = static_cast<int>(cfg.get_int("batch_size", t.batch_size));
  t.meta_images = static_cast<int>(cfg.get_int("meta_images", t.meta_images));
  t.seed = static_cast<std::uint64_t>(cfg.get_int("seed", static_cast<std::int64_t>(t.seed)));
  const auto mode = cfg.get_string("meta_grad_mode", "exact");
  if (mode == "exact") {
    t.meta_grad_mode = MetaGradMode::kExact;
  } else if (mode == "first-order") {
    t.meta_grad_mode = MetaGradMode::kFirstOrder;
  } else {
    throw ConfigError("meta_grad_mode must be exact or first-order");
  }
  return t;
}

}  // namespace oshot::train
