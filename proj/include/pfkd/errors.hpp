#pragma once

#include <stdexcept>
#include <string>

namespace pfkd {

// Error taxonomy mirrors the CLI exit-code contract:
// usage -> 1, data/config -> 2, numeric failure -> 3.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConfigError : DataError {
  using DataError::DataError;
};

struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace pfkd
