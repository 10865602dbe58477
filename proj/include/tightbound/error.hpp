#pragma once

#include <stdexcept>
#include <string>

namespace tightbound {

// Malformed or inconsistent input data (files, label sets, dimensions).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite values produced during optimization (step size too large,
// corrupted parameters, diverging dual variable).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid configuration values. Precondition violations on arguments use
// std::invalid_argument directly.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace tightbound
