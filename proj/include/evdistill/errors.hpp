#pragma once

#include <stdexcept>
#include <string>

namespace evdistill {

// Inputs whose dimensions do not match what a component declares.
struct ShapeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Non-finite values or mathematical domain violations.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed or inconsistent datasets, caches and bundles.
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Invalid or contradictory configuration.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace evdistill
