#pragma once

#include <stdexcept>
#include <string>

namespace randcontrol {

// Invalid configuration or precondition violation; the CLI maps this to exit code 2.
struct ConfigError : std::invalid_argument {
  explicit ConfigError(const std::string& msg) : std::invalid_argument(msg) {}
};

// Numerical failure (NaN/overflow, singular system, CFL violation); CLI exit code 3.
struct NumericalError : std::runtime_error {
  explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace randcontrol
