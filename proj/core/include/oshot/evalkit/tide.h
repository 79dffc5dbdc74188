#pragma once

#include <array>
#include <string>
#include <vector>

#include "oshot/evalkit/metrics.h"

namespace oshot::eval {

enum class ErrorType { kCls = 0, kLoc, kBoth, kDupe, kBkg, kMiss };
constexpr int kNumErrorTypes = 6;
const char* to_string(ErrorType t);

// Error thresholds: foreground IoU 0.5, background IoU 0.1.
struct TideThresholds {
  double foreground = 0.5;
  double background = 0.1;
};

struct ErrorBreakdown {
  double map50 = 0.0;
  std::array<int, kNumErrorTypes> counts{};
  // Count share of each category among all errors.
  std::array<double, kNumErrorTypes> shares{};
  // Missing mAP (1 - map50) apportioned by count share. A count-level
  // estimate, not the oracle-fixing ΔmAP of the original toolkit.
  std::array<double, kNumErrorTypes> impact{};
  int fp_count = 0;
  int fn_count = 0;

  int count(ErrorType t) const { return counts[static_cast<int>(t)]; }
};

// Category of every false positive, in the MatchResult layout; true
// positives carry no category. Precedence: Bkg (IoU_max < 0.1), Dupe (own
// class, IoU >= 0.5, ground truth already taken), Cls (IoU_max >= 0.5 with
// another class), Loc (own class, 0.1 <= IoU < 0.5), Both (other class,
// 0.1 <= IoU < 0.5).
struct FalsePositiveCategory {
  bool is_false_positive = false;
  ErrorType type = ErrorType::kBkg;
  int target_gt = -1;  // ground truth the error refers to, -1 for Bkg
};

struct TideResult {
  MatchResult match;
  std::vector<std::vector<FalsePositiveCategory>> categories;
  // Ground truth neither matched nor referenced by a Cls/Loc/Both error.
  std::vector<std::vector<bool>> missed;
  ErrorBreakdown breakdown;
};

TideResult tide_analyze(const std::vector<ImageEval>& images, int num_classes,
                        const TideThresholds& thr = {});
ErrorBreakdown tide_decompose(const std::vector<ImageEval>& images, int num_classes,
                              const TideThresholds& thr = {});

}  // namespace oshot::eval
