// Exception taxonomy shared across the library. The CLI maps these to
// process exit codes (config -> 1, data/parse -> 2, non-convergence -> 3).
#pragma once

#include <stdexcept>
#include <string>

namespace kbe {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConfigError : Error {
  using Error::Error;
};

struct DataError : Error {
  using Error::Error;
};

// Malformed input files; message carries file/line context.
struct ParseError : DataError {
  using DataError::DataError;
};

struct ConvergenceError : Error {
  using Error::Error;
};

}  // namespace kbe
