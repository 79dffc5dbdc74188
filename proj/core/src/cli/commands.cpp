#include "oshot/cli/commands.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "oshot/adapt/adapt.h"
#include "oshot/common/errors.h"
#include "oshot/common/hash.h"
#include "oshot/evalkit/curve.h"
#include "oshot/evalkit/evaluate.h"
#include "oshot/evalkit/plot.h"
#include "oshot/evalkit/tide.h"
#include "oshot/synthgen/dataset_io.h"
#include "oshot/synthgen/domain.h"
#include "oshot/synthgen/scene.h"
#include "oshot/train/trainer.h"

namespace oshot::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t) {
  return std::chrono::duration<double>(Clock::now() - t).count();
}

std::string fixed(double v, int digits = 9) {
  if (!std::isfinite(v)) return "";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

class Manifest {
 public:
  Manifest(std::string command, const KeyValueConfig& cfg) : start_(Clock::now()) {
    doc_["command"] = std::move(command);
    doc_["config"] = json::object();
    for (const auto& [k, v] : cfg.entries()) doc_["config"][k] = v;
    doc_["seed"] = cfg.get_int("seed", 0);
    doc_["inputs"] = json::object();
    doc_["outputs"] = json::array();
    doc_["timings"] = json::object();
  }
  void input(const fs::path& p) { doc_["inputs"][p.string()] = git_tree_hash(p); }
  void output(const fs::path& p) { doc_["outputs"].push_back(p.string()); }
  void timing(const std::string& key, double seconds) { doc_["timings"][key] = seconds; }
  void note(const std::string& key, json value) { doc_[key] = std::move(value); }
  void write(const fs::path& dir) {
    doc_["timings"]["total_seconds"] = seconds_since(start_);
    fs::create_directories(dir);
    std::ofstream(dir / "manifest.json") << doc_.dump(2) << "\n";
  }

 private:
  json doc_;
  Clock::time_point start_;
};

synth::SceneSpec scene_spec(const KeyValueConfig& cfg) {
  synth::SceneSpec s;
  s.image_size = static_cast<int>(cfg.get_int("scene.image_size", s.image_size));
  s.min_objects = static_cast<int>(cfg.get_int("scene.min_objects", s.min_objects));
  s.max_objects = static_cast<int>(cfg.get_int("scene.max_objects", s.max_objects));
  s.cue_strength = cfg.get_double("scene.cue_strength", s.cue_strength);
  s.min_object_size = static_cast<int>(cfg.get_int("scene.min_object_size", s.min_object_size));
  s.max_object_size = static_cast<int>(cfg.get_int("scene.max_object_size", s.max_object_size));
  s.background = synth::background_from_string(
      cfg.get_string("scene.background", synth::to_string(s.background)));
  return s;
}

det::DetectorConfig detector_config(const KeyValueConfig& cfg) {
  auto d = det::DetectorConfig::read(cfg);
  d.validate();
  return d;
}

int threads_of(const KeyValueConfig& cfg) {
  return std::max<int>(1, static_cast<int>(cfg.get_int("threads", 1)));
}

fs::path data_root(const KeyValueConfig& cfg) { return resolve(cfg.get_string("data.dir", "data")); }

std::vector<std::string> target_names(const KeyValueConfig& cfg, const fs::path& root) {
  auto names = cfg.get_strings("eval.targets", {});
  if (!names.empty()) {
    for (auto& n : names) {
      if (n.rfind("target-", 0) != 0) n = "target-" + n;
    }
    return names;
  }
  if (!fs::is_directory(root)) throw MissingInput("data directory not found: " + root.string());
  for (const auto& e : fs::directory_iterator(root)) {
    const auto n = e.path().filename().string();
    if (e.is_directory() && n.rfind("target-", 0) == 0) names.push_back(n);
  }
  std::sort(names.begin(), names.end());
  if (names.empty()) throw MissingInput("no target-* datasets under " + root.string());
  return names;
}

std::vector<int> gamma_list(const KeyValueConfig& cfg, const std::string& key,
                            const std::vector<int>& fallback) {
  const auto raw = cfg.get_strings(key, {});
  if (raw.empty()) return fallback;
  std::vector<int> out;
  for (const auto& s : raw) {
    try {
      std::size_t used = 0;
      const int g = std::stoi(s, &used);
      if (used != s.size() || g < 0) throw std::invalid_argument(s);
      out.push_back(g);
    } catch (const std::exception&) {
      throw ConfigError(key + ": invalid gamma `" + s + "`");
    }
  }
  return out;
}

std::vector<fs::path> checkpoint_paths(const KeyValueConfig& cfg) {
  auto list = cfg.get_strings("eval.checkpoints", {});
  if (list.empty()) {
    if (auto one = cfg.find("eval.checkpoint")) list.push_back(*one);
  }
  if (list.empty()) throw ConfigError("eval.checkpoints: no checkpoint given");
  std::vector<fs::path> out;
  for (const auto& p : list) out.push_back(resolve(p));
  return out;
}

adapt::AdaptConfig adapt_config(const KeyValueConfig& cfg, const train::Checkpoint& ckpt) {
  adapt::AdaptConfig a;
  // Same step size as the meta inner loop unless overridden.
  a.inner_lr = cfg.get_double("adapt.inner_lr", ckpt.config.inner_lr);
  a.seed = static_cast<std::uint64_t>(cfg.get_int("adapt.seed", static_cast<std::int64_t>(ckpt.config.seed)));
  a.validate();
  return a;
}

std::string predictions_jsonl(const std::vector<adapt::ImageResult>& results, int gamma) {
  std::ostringstream os;
  for (const auto& r : results) {
    json rec;
    rec["image_id"] = r.image_id;
    rec["gamma"] = gamma;
    rec["detections"] = json::array();
    for (const auto& d : r.detections) {
      rec["detections"].push_back({{"class", d.class_id},
                                   {"x1", d.box.x1},
                                   {"y1", d.box.y1},
                                   {"x2", d.box.x2},
                                   {"y2", d.box.y2},
                                   {"score", d.score}});
    }
    rec["rot_loss_trace"] = r.trace.rotation_loss;
    if (r.trace.fault) rec["fault"] = r.trace.fault_message;
    os << rec.dump() << "\n";
  }
  return os.str();
}

struct MetricsCsvRow {
  std::string variant;
  int gamma = 0;
  std::string target;
  double map = 0.0;
  eval::ErrorBreakdown breakdown;
  double seconds_per_image = 0.0;
  int faults = 0;
};

void write_metrics_csv(const fs::path& path, const std::vector<MetricsCsvRow>& rows) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << "variant,gamma,target,mAP";
  for (int t = 0; t < eval::kNumErrorTypes; ++t) f << ',' << eval::to_string(static_cast<eval::ErrorType>(t));
  f << ",fp,fn,faults\n";
  for (const auto& r : rows) {
    f << r.variant << ',' << r.gamma << ',' << r.target << ',' << fixed(r.map);
    for (int c : r.breakdown.counts) f << ',' << c;
    f << ',' << r.breakdown.fp_count << ',' << r.breakdown.fn_count << ',' << r.faults << '\n';
  }
}

std::vector<MetricsCsvRow> read_metrics_csv(const fs::path& path) {
  std::ifstream f(path);
  if (!f) throw MissingInput("metrics file not found: " + path.string());
  std::vector<MetricsCsvRow> rows;
  std::string line;
  std::getline(f, line);
  while (std::getline(f, line)) {
    const auto cells = split(line, ',');
    if (cells.size() < 4 + eval::kNumErrorTypes + 3) continue;
    MetricsCsvRow r;
    r.variant = cells[0];
    r.gamma = std::stoi(cells[1]);
    r.target = cells[2];
    r.map = cells[3].empty() ? std::nan("") : std::stod(cells[3]);
    for (int t = 0; t < eval::kNumErrorTypes; ++t) r.breakdown.counts[static_cast<std::size_t>(t)] = std::stoi(cells[4 + static_cast<std::size_t>(t)]);
    r.breakdown.fp_count = std::stoi(cells[4 + eval::kNumErrorTypes]);
    r.breakdown.fn_count = std::stoi(cells[5 + eval::kNumErrorTypes]);
    r.faults = std::stoi(cells[6 + eval::kNumErrorTypes]);
    rows.push_back(r);
  }
  return rows;
}

void plot_tide(const fs::path& path, const std::vector<MetricsCsvRow>& rows) {
  // One bar group per (variant, gamma): error count shares pooled over targets.
  std::map<std::pair<std::string, int>, std::array<double, eval::kNumErrorTypes>> pooled;
  std::vector<std::pair<std::string, int>> order;
  for (const auto& r : rows) {
    const auto key = std::make_pair(r.variant, r.gamma);
    if (!pooled.count(key)) {
      pooled[key] = {};
      order.push_back(key);
    }
    for (int t = 0; t < eval::kNumErrorTypes; ++t) pooled[key][static_cast<std::size_t>(t)] += r.breakdown.counts[static_cast<std::size_t>(t)];
  }
  std::vector<eval::BarGroup> groups;
  for (std::size_t i = 0; i < order.size(); ++i) {
    const auto& counts = pooled[order[i]];
    double total = 0.0;
    for (double c : counts) total += c;
    eval::BarGroup g;
    g.label = order[i].first + " g=" + std::to_string(order[i].second);
    g.color = eval::palette(i);
    for (double c : counts) g.values.push_back(total > 0 ? c / total : 0.0);
    groups.push_back(std::move(g));
  }
  std::vector<std::string> cats;
  for (int t = 0; t < eval::kNumErrorTypes; ++t) cats.emplace_back(eval::to_string(static_cast<eval::ErrorType>(t)));
  eval::bar_chart(path, "Error decomposition (count share)", "share", cats, groups);
}

fs::path out_dir(const KeyValueConfig& cfg, const std::string& key, const std::string& fallback) {
  return resolve(cfg.get_string(key, fallback));
}

std::vector<eval::CurveTable> run_curves(const std::vector<fs::path>& ckpts, const fs::path& root,
                                         const std::vector<std::string>& targets,
                                         const KeyValueConfig& cfg, Manifest& manifest,
                                         std::ostream& out) {
  const auto gammas = gamma_list(cfg, "curve.gammas", curve_gammas());
  std::vector<eval::CurveTable> tables;
  for (const auto& path : ckpts) {
    const auto ckpt = train::Checkpoint::load(path);
    if (!ckpt.trained(train::kRotationGroup)) {
      out << "skipping curve for " << path.string() << ": no trained rotation head\n";
      continue;
    }
    const auto a = adapt_config(cfg, ckpt);
    for (const auto& t : targets) {
      const auto data = synth::read_dataset(root / t);
      const auto start = Clock::now();
      eval::CurveTable table;
      table.label = train::to_string(ckpt.config.variant) + "/" + t.substr(7);
      table.points = eval::iterations_curve(ckpt, data, gammas, a, threads_of(cfg));
      manifest.timing("curve:" + table.label, seconds_since(start));
      for (const auto& p : table.points) {
        out << table.label << " gamma=" << p.gamma << " mAP="
            << (p.map ? fixed(*p.map, 4) : std::string("missing")) << "\n";
      }
      tables.push_back(std::move(table));
    }
  }
  return tables;
}

}  // namespace

const std::vector<int>& curve_gammas() {
  static const std::vector<int> g{0, 1, 2, 5, 10, 15, 20, 30, 50};
  return g;
}

fs::path output_root() {
  if (const char* env = std::getenv(kOutputRootEnv); env && *env) return fs::path(env);
  return fs::current_path();
}

fs::path resolve(const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : output_root() / path;
}

Invocation parse_args(const std::vector<std::string>& args) {
  CLI::App app{"One-shot unsupervised cross-domain detection experiments"};
  app.require_subcommand(1);
  Invocation inv;
  std::string config_path;
  std::vector<CLI::App*> subs;
  for (const char* name : {"gen-data", "train", "adapt-eval", "curve", "report"}) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "flat key = value config file");
    sub->add_flag("--force", inv.force, "overwrite existing outputs");
    if (std::string(name) == "adapt-eval") sub->add_flag("--curve", inv.curve, "also sweep gamma");
    sub->allow_extras();
    subs.push_back(sub);
  }
  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    inv.command = "help";
    for (auto* s : subs) {
      if (s->parsed()) inv.help = s->help();
    }
    if (inv.help.empty()) inv.help = app.help();
    return inv;
  } catch (const CLI::ParseError& e) {
    throw ConfigError(std::string("command line: ") + e.what());
  }
  CLI::App* chosen = nullptr;
  for (auto* s : subs) {
    if (s->parsed()) chosen = s;
  }
  inv.command = chosen->get_name();
  if (!config_path.empty()) {
    const fs::path p = resolve(config_path);
    if (!fs::exists(p)) throw MissingInput("config file not found: " + p.string());
    inv.config = KeyValueConfig::load(p);
  }
  const auto extras = chosen->remaining();
  for (std::size_t i = 0; i < extras.size(); ++i) {
    const auto& a = extras[i];
    if (a.rfind("--", 0) != 0 || a.size() < 3) throw ConfigError("unexpected argument `" + a + "`");
    const auto eq = a.find('=');
    if (eq != std::string::npos) {
      inv.config.set(a.substr(2, eq - 2), a.substr(eq + 1));
    } else {
      if (i + 1 >= extras.size()) throw ConfigError("missing value for `" + a + "`");
      inv.config.set(a.substr(2), extras[++i]);
    }
  }
  return inv;
}

int cmd_gen_data(const Invocation& inv, std::ostream& out) {
  const auto& cfg = inv.config;
  Manifest manifest("gen-data", cfg);
  const auto root = data_root(cfg);
  const auto seed = static_cast<std::uint64_t>(cfg.get_int("seed", 0));
  const auto spec = scene_spec(cfg);
  const auto det = detector_config(cfg);
  spec.validate(det.feature_stride());
  if (spec.num_classes() != det.num_classes) {
    throw ConfigError("scene has " + std::to_string(spec.num_classes()) +
                      " classes but det.num_classes = " + std::to_string(det.num_classes));
  }
  const int n_targets = static_cast<int>(cfg.get_int("data.targets", 3));
  if (n_targets < 1 || n_targets > 8) throw ConfigError("data.targets must be in 1..8");
  const int n_train = static_cast<int>(cfg.get_int("data.train_count", 400));
  const int n_val = static_cast<int>(cfg.get_int("data.val_count", 100));
  const int n_target = static_cast<int>(cfg.get_int("data.target_count", 100));
  if (n_train < 1 || n_val < 0 || n_target < 1) throw ConfigError("data counts must be positive");
  if (fs::exists(root) && !fs::is_empty(root)) {
    if (!inv.force) {
      throw ConfigError("refusing to overwrite existing dataset at " + root.string() + " (pass --force)");
    }
    fs::remove_all(root);
  }
  const int threads = threads_of(cfg);
  const synth::DomainSpec source;
  std::ostringstream meta;
  meta << "seed = " << seed << "\nscene.image_size = " << spec.image_size << "\n";

  auto emit = [&](const std::string& name, const std::vector<synth::AnnotatedImage>& images,
                  const synth::DomainSpec& domain) {
    const auto start = Clock::now();
    write_dataset(root / name, images,
                  meta.str() + "domain = " + domain.name + "\nchain = " + domain.chain_string() + "\n");
    manifest.output(root / name);
    manifest.timing(name, seconds_since(start));
    out << "wrote " << images.size() << " images to " << (root / name).string() << "\n";
  };
  emit("source-train", synth::generate_split(spec, source, "source-train", n_train, seed, threads), source);
  if (n_val > 0) emit("source-val", synth::generate_split(spec, source, "source-val", n_val, seed, threads), source);
  for (const auto& d : synth::default_target_domains(n_targets)) {
    emit("target-" + d.name, synth::generate_split(spec, d, "target-" + d.name, n_target, seed, threads), d);
  }
  manifest.write(root);
  return kOk;
}

int cmd_train(const Invocation& inv, std::ostream& out) {
  const auto& cfg = inv.config;
  Manifest manifest("train", cfg);
  auto tc = train::TrainConfig::read(cfg);
  tc.validate();
  const auto det = detector_config(cfg);
  const auto root = data_root(cfg);
  const auto dir = out_dir(cfg, "train.out", "runs/" + train::to_string(tc.variant) + "-s" + std::to_string(tc.seed));
  const auto ckpt_path = dir / "checkpoint.oshot";
  if (fs::exists(ckpt_path) && !inv.force) {
    throw ConfigError("refusing to overwrite " + ckpt_path.string() + " (pass --force)");
  }
  std::optional<train::Checkpoint> warm;
  if (tc.is_meta()) {
    const auto ws = cfg.find("train.warm_start");
    if (!ws) {
      throw ConfigError("variant " + train::to_string(tc.variant) +
                        " requires train.warm_start: an oshot or tran-oshot checkpoint");
    }
    const auto ws_path = resolve(*ws);
    warm = train::Checkpoint::load(ws_path);
    const auto v = warm->config.variant;
    if (v != train::Variant::kOshot && v != train::Variant::kTranOshot) {
      throw ConfigError("train.warm_start must be an oshot or tran-oshot checkpoint, got " + train::to_string(v));
    }
    manifest.input(ws_path);
  }

  const auto load_start = Clock::now();
  const auto source = synth::read_dataset(root / "source-train");
  std::vector<synth::AnnotatedImage> val;
  if (fs::exists(root / "source-val")) val = synth::read_dataset(root / "source-val");
  manifest.input(root / "source-train");
  if (!val.empty()) manifest.input(root / "source-val");
  manifest.timing("load", seconds_since(load_start));

  train::TrainHooks hooks;
  hooks.validation = val.empty() ? nullptr : &val;
  hooks.eval_every = static_cast<int>(cfg.get_int("train.eval_every", 0));
  std::vector<train::MetricRow> rows;
  hooks.on_epoch = [&](const train::MetricRow& r) {
    rows.push_back(r);
    out << train::to_string(tc.variant) << " epoch " << r.epoch << " L_d=" << fixed(r.detection_loss, 4)
        << " L_r=" << fixed(r.rotation_loss, 4) << " mAP=" << fixed(r.map, 4) << std::endl;
  };

  fs::create_directories(dir);
  const auto start = Clock::now();
  train::Checkpoint ckpt;
  try {
    if (warm) {
      ckpt = train::meta_pretrain(source, tc, *warm, hooks);
    } else {
      ckpt = train::pretrain_multitask(source, tc, det, hooks);
    }
  } catch (const train::DivergenceError& e) {
    if (e.last_good()) {
      const auto p = dir / "checkpoint.last_good.oshot";
      e.last_good()->save(p);
      manifest.output(p);
    }
    train::write_metric_log(dir / "metrics.csv", rows);
    manifest.output(dir / "metrics.csv");
    manifest.note("fault", e.what());
    manifest.write(dir);
    throw;
  }
  manifest.timing("train", seconds_since(start));
  ckpt.save(ckpt_path);
  train::write_metric_log(dir / "metrics.csv", rows);
  manifest.output(ckpt_path);
  manifest.output(dir / "metrics.csv");
  manifest.note("config_hash", ckpt.config_hash());
  manifest.write(dir);
  out << "checkpoint written to " << ckpt_path.string() << "\n";
  return kOk;
}

int cmd_adapt_eval(const Invocation& inv, std::ostream& out) {
  const auto& cfg = inv.config;
  Manifest manifest(inv.curve ? "adapt-eval --curve" : "adapt-eval", cfg);
  const auto ckpts = checkpoint_paths(cfg);
  const auto root = data_root(cfg);
  const auto targets = target_names(cfg, root);
  const auto gammas = gamma_list(cfg, "eval.gammas", {0, 5});
  const auto dir = out_dir(cfg, "eval.out", "eval");
  fs::create_directories(dir / "predictions");

  std::vector<MetricsCsvRow> rows;
  for (const auto& path : ckpts) {
    const auto ckpt = train::Checkpoint::load(path);
    manifest.input(path);
    const auto variant = train::to_string(ckpt.config.variant);
    auto a = adapt_config(cfg, ckpt);
    for (const auto& t : targets) {
      const auto data = synth::read_dataset(root / t);
      manifest.input(root / t);
      for (int g : gammas) {
        if (g > 0 && !ckpt.trained(train::kRotationGroup)) {
          out << "skipping " << variant << " gamma=" << g << ": no trained rotation head\n";
          continue;
        }
        a.gamma = g;
        const auto start = Clock::now();
        const auto results = adapt::adapt_batch(data, ckpt, a, threads_of(cfg));
        const double secs = seconds_since(start);
        std::vector<eval::ImageEval> evals;
        MetricsCsvRow row;
        for (std::size_t i = 0; i < data.size(); ++i) {
          evals.push_back({results[i].detections, data[i].labels});
          row.faults += results[i].trace.fault ? 1 : 0;
        }
        row.variant = variant;
        row.gamma = g;
        row.target = t.substr(7);
        row.breakdown = eval::tide_decompose(evals, ckpt.detector.num_classes);
        row.map = row.breakdown.map50;
        row.seconds_per_image = data.empty() ? 0.0 : secs / static_cast<double>(data.size());
        const auto pred = dir / "predictions" / (variant + "__" + row.target + "__g" + std::to_string(g) + ".jsonl");
        std::ofstream(pred) << predictions_jsonl(results, g);
        manifest.output(pred);
        manifest.timing("adapt:" + variant + "/" + row.target + "/g" + std::to_string(g) + ":seconds_per_image",
                        row.seconds_per_image);
        out << variant << " " << row.target << " gamma=" << g << " mAP=" << fixed(row.map, 4)
            << " (" << fixed(row.seconds_per_image, 3) << " s/image)\n";
        rows.push_back(row);
      }
    }
  }
  write_metrics_csv(dir / "metrics.csv", rows);
  manifest.output(dir / "metrics.csv");
  plot_tide(dir / "tide.png", rows);
  manifest.output(dir / "tide.png");
  if (inv.curve) {
    const auto tables = run_curves(ckpts, root, targets, cfg, manifest, out);
    eval::write_curve_csv(dir / "curve.csv", tables);
    eval::plot_curves(dir / "curve.png", tables);
    manifest.output(dir / "curve.csv");
    manifest.output(dir / "curve.png");
  }
  manifest.note("note", "error magnitudes are count shares, not the original toolkit's dmAP units");
  manifest.write(dir);
  return kOk;
}

int cmd_curve(const Invocation& inv, std::ostream& out) {
  const auto& cfg = inv.config;
  Manifest manifest("curve", cfg);
  const auto ckpts = checkpoint_paths(cfg);
  for (const auto& p : ckpts) manifest.input(p);
  const auto root = data_root(cfg);
  const auto targets = target_names(cfg, root);
  for (const auto& t : targets) manifest.input(root / t);
  const auto dir = out_dir(cfg, "curve.out", "curve");
  fs::create_directories(dir);
  const auto tables = run_curves(ckpts, root, targets, cfg, manifest, out);
  eval::write_curve_csv(dir / "curve.csv", tables);
  eval::plot_curves(dir / "curve.png", tables);
  manifest.output(dir / "curve.csv");
  manifest.output(dir / "curve.png");
  manifest.write(dir);
  return kOk;
}

int cmd_report(const Invocation& inv, std::ostream& out) {
  const auto& cfg = inv.config;
  Manifest manifest("report", cfg);
  auto inputs = cfg.get_strings("report.in", {});
  if (inputs.empty()) inputs.push_back(cfg.get_string("eval.out", "eval"));
  std::vector<MetricsCsvRow> rows;
  for (const auto& in : inputs) {
    const auto p = resolve(in) / "metrics.csv";
    manifest.input(p);
    for (auto& r : read_metrics_csv(p)) rows.push_back(std::move(r));
  }
  // Mean over every row (targets, seeds) of each (variant, gamma).
  struct Acc {
    double sum = 0.0;
    int n = 0;
    std::array<double, eval::kNumErrorTypes> counts{};
  };
  std::map<std::pair<std::string, int>, Acc> acc;
  std::vector<std::pair<std::string, int>> order;
  std::map<std::pair<std::string, int>, std::map<std::string, std::pair<double, int>>> per_target;
  std::vector<std::string> target_order;
  for (const auto& r : rows) {
    const auto key = std::make_pair(r.variant, r.gamma);
    if (!acc.count(key)) order.push_back(key);
    auto& a = acc[key];
    if (std::isfinite(r.map)) {
      a.sum += r.map;
      ++a.n;
      auto& pt = per_target[key][r.target];
      pt.first += r.map;
      ++pt.second;
    }
    for (int t = 0; t < eval::kNumErrorTypes; ++t) a.counts[static_cast<std::size_t>(t)] += r.breakdown.counts[static_cast<std::size_t>(t)];
    if (std::find(target_order.begin(), target_order.end(), r.target) == target_order.end()) target_order.push_back(r.target);
  }
  std::ostringstream md;
  md << "| variant | gamma |";
  for (const auto& t : target_order) md << ' ' << t << " |";
  md << " mean mAP |";
  for (int t = 0; t < eval::kNumErrorTypes; ++t) md << ' ' << eval::to_string(static_cast<eval::ErrorType>(t)) << " |";
  md << "\n|---|---|";
  for (std::size_t i = 0; i < target_order.size() + 1 + eval::kNumErrorTypes; ++i) md << "---|";
  md << "\n";
  for (const auto& key : order) {
    const auto& a = acc[key];
    md << "| " << key.first << " | " << key.second << " |";
    for (const auto& t : target_order) {
      const auto it = per_target[key].find(t);
      md << ' ' << (it == per_target[key].end() ? std::string("-") : fixed(100.0 * it->second.first / it->second.second, 1)) << " |";
    }
    md << ' ' << (a.n ? fixed(100.0 * a.sum / a.n, 1) : std::string("-")) << " |";
    double total = 0.0;
    for (double c : a.counts) total += c;
    for (double c : a.counts) md << ' ' << fixed(total > 0 ? 100.0 * c / total : 0.0, 1) << " |";
    md << "\n";
  }
  md << "\nmAP@0.5 in points. Error columns are count shares (%) of all errors, not the original "
        "toolkit's dmAP units.\n";
  const auto dir = out_dir(cfg, "report.out", "report");
  fs::create_directories(dir);
  std::ofstream(dir / "report.md") << md.str();
  manifest.output(dir / "report.md");
  manifest.write(dir);
  out << md.str();
  return kOk;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  try {
    const auto inv = parse_args(args);
    if (inv.command == "help") {
      out << inv.help;
      return kOk;
    }
    if (inv.command == "gen-data") return cmd_gen_data(inv, out);
    if (inv.command == "train") return cmd_train(inv, out);
    if (inv.command == "adapt-eval") return cmd_adapt_eval(inv, out);
    if (inv.command == "curve") return cmd_curve(inv, out);
    if (inv.command == "report") return cmd_report(inv, out);
    err << "unknown command " << inv.command << "\n";
    return kUsage;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const TrainingFault& e) {
    err << "training fault: " << e.what() << "\n";
    return kTrainingFault;
  } catch (const MissingInput& e) {
    err << "missing input: " << e.what() << "\n";
    return kMissingInput;
  } catch (const std::invalid_argument& e) {
    err << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  }
}

}  // namespace oshot::cli
