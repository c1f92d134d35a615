#pragma once

#include <stdexcept>
#include <string>

namespace teprompt {

/// Invalid configuration: bad flag values, malformed config files, answer
/// words that do not fit the backbone vocabulary. The CLI maps these to a
/// dedicated exit code.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Malformed input data (corpus records, checkpoints, report files).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Numerical failure during training (non-finite loss and the like).
class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace teprompt
