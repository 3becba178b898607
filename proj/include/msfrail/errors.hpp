#pragma once

#include <stdexcept>
#include <string>

namespace msfrail {

// File or text input that violates a format or schema. Messages name the
// offending row/column where one exists.
struct ParseError : std::runtime_error {
  explicit ParseError(const std::string& msg) : std::runtime_error(msg) {}
};

// A request that is structurally invalid: incompatible model pieces,
// out-of-range settings, mismatched specs.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Inputs that are well-formed but inconsistent with the data at hand
// (missing covariates for an account/time, empty panels, ...).
struct DataError : std::runtime_error {
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Non-finite values or degenerate quantities encountered during evaluation.
struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace msfrail
