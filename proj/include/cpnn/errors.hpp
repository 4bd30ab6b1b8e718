#pragma once

#include <stdexcept>
#include <string>

namespace cpnn {

// Invalid or inconsistent experiment configuration (CLI exit code 2).
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// NaN or Inf showed up in losses, activations or parameters (CLI exit code 3).
struct NumericalError : std::runtime_error {
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

// The stream generator could not place a point that satisfies its
// constraints (pathological boundary, not reachable with the shipped ones).
struct GenerationError : std::runtime_error {
  explicit GenerationError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace cpnn
