#include "oshot/evalkit/curve.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <mutex>
#include <thread>

#include "oshot/common/errors.h"
#include "oshot/evalkit/metrics.h"
#include "oshot/evalkit/plot.h"

namespace oshot::eval {

std::vector<CurvePoint> iterations_curve(const train::Checkpoint& ckpt,
                                         const std::vector<synth::AnnotatedImage>& targets,
                                         const std::vector<int>& gammas,
                                         const adapt::AdaptConfig& cfg, int threads) {
  if (gammas.empty() || gammas.front() != 0 || !std::is_sorted(gammas.begin(), gammas.end()) ||
      std::adjacent_find(gammas.begin(), gammas.end()) != gammas.end()) {
    throw ConfigError("gamma list must be strictly ascending and start at 0");
  }
  const std::size_t G = gammas.size();
  // evals[g][i]
  std::vector<std::vector<ImageEval>> evals(G, std::vector<ImageEval>(targets.size()));
  std::vector<int> completed(targets.size(), 0);
  std::vector<char> faulted(targets.size(), 0);

  auto work = [&](std::size_t i) {
    auto local = cfg;
    local.gamma = gammas.back();
    local.seed = adapt::image_seed(cfg.seed, targets[i].id);
    auto observer = [&](int step, const det::ParamGroup& feature) {
      const auto it = std::find(gammas.begin(), gammas.end(), step);
      if (it == gammas.end()) return;
      const auto g = static_cast<std::size_t>(it - gammas.begin());
      evals[g][i] = {adapt::predict(targets[i].image, feature, ckpt), targets[i].labels};
    };
    const auto adapted = adapt::adapt_one(targets[i].image, ckpt, local, observer);
    faulted[i] = adapted.trace.fault;
    completed[i] = static_cast<int>(adapted.trace.rotation_loss.size());
  };
  if (threads <= 1) {
    for (std::size_t i = 0; i < targets.size(); ++i) work(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex mu;
    {
      std::vector<std::jthread> pool;
      for (int t = 0; t < threads; ++t) {
        pool.emplace_back([&] {
          for (std::size_t i = next++; i < targets.size(); i = next++) {
            try {
              work(i);
            } catch (...) {
              std::lock_guard lock(mu);
              if (!failure) failure = std::current_exception();
            }
          }
        });
      }
    }
    if (failure) std::rethrow_exception(failure);
  }

  std::vector<CurvePoint> out;
  for (std::size_t g = 0; g < G; ++g) {
    CurvePoint p;
    p.gamma = gammas[g];
    for (std::size_t i = 0; i < targets.size(); ++i) {
      // A faulted run only reached `completed` steps before the failing one.
      if (faulted[i] && gammas[g] > completed[i]) ++p.faults;
    }
    if (p.faults == 0) p.map = mean_average_precision(evals[g], ckpt.detector.num_classes);
    out.push_back(p);
  }
  return out;
}

void write_curve_csv(const std::filesystem::path& path, const std::vector<CurveTable>& tables) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << "target,gamma,mAP,faults\n";
  char buf[64];
  for (const auto& t : tables) {
    for (const auto& p : t.points) {
      f << t.label << ',' << p.gamma << ',';
      if (p.map) {
        std::snprintf(buf, sizeof buf, "%.9f", *p.map);
        f << buf;
      }
      f << ',' << p.faults << '\n';
    }
  }
}

void plot_curves(const std::filesystem::path& path, const std::vector<CurveTable>& tables) {
  std::vector<Series> series;
  for (std::size_t k = 0; k < tables.size(); ++k) {
    Series s;
    s.label = tables[k].label;
    s.color = palette(k);
    for (const auto& p : tables[k].points) {
      s.x.push_back(p.gamma);
      s.y.push_back(p.map ? *p.map : std::numeric_limits<double>::quiet_NaN());
    }
    series.push_back(std::move(s));
  }
  line_plot(path, "mAP vs adaptive iterations", "gamma", "mAP@0.5", series);
}

}  // namespace oshot::eval
