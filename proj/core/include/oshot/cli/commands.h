#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "oshot/common/config.h"

namespace oshot::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kConfigError = 2, kTrainingFault = 3, kMissingInput = 4 };

// Relative output paths resolve against this directory.
inline constexpr const char* kOutputRootEnv = "OSHOT_OUTPUT_ROOT";

struct Invocation {
  std::string command;
  KeyValueConfig config;
  bool force = false;
  bool curve = false;
  std::string help;  // set when --help was given
};

// Parses `<command> [--config FILE] [--force] [--curve] [--key value ...]`.
// Overrides apply on top of the config file. Throws ConfigError.
Invocation parse_args(const std::vector<std::string>& args);

// Parses, dispatches and maps errors to exit codes.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int cmd_gen_data(const Invocation& inv, std::ostream& out);
int cmd_train(const Invocation& inv, std::ostream& out);
int cmd_adapt_eval(const Invocation& inv, std::ostream& out);
int cmd_curve(const Invocation& inv, std::ostream& out);
int cmd_report(const Invocation& inv, std::ostream& out);

std::filesystem::path output_root();
std::filesystem::path resolve(const std::string& p);

// Gamma sweep of the iterations curve.
const std::vector<int>& curve_gammas();

}  // namespace oshot::cli
