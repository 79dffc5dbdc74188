#include <iostream>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "oshot/cli/commands.h"

int main(int argc, char** argv) {
  // Single intra-op thread keeps runs bit-reproducible; use `threads` for
  // per-image parallelism instead.
  torch::set_num_threads(1);
  std::vector<std::string> args(argv + 1, argv + argc);
  return oshot::cli::run(args, std::cout, std::cerr);
}
