#pragma once

#include <stdexcept>
#include <string>

namespace oshot {

// Malformed or inconsistent configuration. CLI exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite loss or other numerical failure during optimization. CLI exit
// code 3.
class TrainingFault : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A required file, directory or checkpoint group is absent. CLI exit code 4.
class MissingInput : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace oshot
