#pragma once

#include <stdexcept>
#include <string>

namespace clearn {

// Error taxonomy matches the CLI exit codes: config -> 2, numerical -> 3.

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Sampling preconditions violated (empty buffer, no future exists, ...).
class SamplingError : public std::runtime_error {
 public:
  explicit SamplingError(const std::string& what) : std::runtime_error(what) {}
};

// Solver / fixed-point iteration failures, with the residual that was reached.
class NumericalError : public std::runtime_error {
 public:
  NumericalError(const std::string& what, double residual)
      : std::runtime_error(what), residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_ = 0.0;
};

}  // namespace clearn
