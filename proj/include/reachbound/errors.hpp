#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace reachbound {

/// Configuration failed schema validation (unknown key, wrong type, bad value).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A required input file or directory is missing or unreadable.
struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A classical solver was asked to run outside its stability region.
struct StabilityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConvergenceError : std::runtime_error {
  ConvergenceError(const std::string& what, std::size_t iterations, double residual)
      : std::runtime_error(what), iterations(iterations), residual(residual) {}
  std::size_t iterations;
  double residual;
};

/// Training produced a non-finite loss.
struct DivergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NothingToEvaluate : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace reachbound
