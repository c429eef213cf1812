#pragma once

#include <stdexcept>
#include <string>

namespace lesiondiff {

// Invalid parameters or configuration values. CLI exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shape mismatch between images, masks, or tensors.
class DimensionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Argument outside the domain of an operation (e.g. a timestep out of range).
class DomainError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// File system or file format failure. CLI exit code 3.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite values encountered during training or sampling. CLI exit code 4.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Operation not supported by the receiver (e.g. gradients of an analytic model).
class UnsupportedError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace lesiondiff
