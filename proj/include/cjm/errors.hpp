#pragma once

#include <stdexcept>
#include <string>

namespace cjm {

/// Bad flags, unknown subcommands, malformed config keys. CLI exit code 2.
struct UsageError : std::runtime_error {
  explicit UsageError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Schema violations, inconsistent files, broken dataset invariants. CLI exit code 3.
struct DataError : std::runtime_error {
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Non-finite likelihoods, singular designs, failed factorizations. CLI exit code 4.
struct NumericalError : std::runtime_error {
  explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace cjm
