#pragma once

#include <stdexcept>
#include <string>

namespace hgdre {

// Process exit codes used by the CLI: 0 success, 2 usage, 3 data, 4 numeric.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed input files, unknown labels, missing paths.
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Inconsistent dimensions or option values, raised at construction time.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Non-finite values during optimization (divergence signal).
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Backend failure while annotating; carries the failing turn.
struct AnnotationError : DataError {
  AnnotationError(int turn, const std::string& what)
      : DataError("turn " + std::to_string(turn) + ": " + what), turn_index(turn) {}
  int turn_index;
};

}  // namespace hgdre
