#pragma once

#include <stdexcept>
#include <string>

namespace fhtgibbs {

// Bad inputs: configs, shapes, file contents. CLI maps these to exit code 1.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed on-disk data; validation-class, but kept distinct so readers can
// attach byte offsets.
class FormatError : public ValidationError {
 public:
  explicit FormatError(const std::string& msg) : ValidationError(msg) {}
};

// Runtime numerical failure: divergence, singular gauges, vanishing mass.
// CLI maps these to exit code 2.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace fhtgibbs
