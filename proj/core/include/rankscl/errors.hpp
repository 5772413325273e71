#pragma once

#include <stdexcept>
#include <string>

namespace rankscl {

// Base class for every error raised by the library. The CLI maps the
// concrete subclasses onto process exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor shapes that do not conform to an operation's contract.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// NaN/Inf where finite values are required, or a degenerate numeric input.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Malformed dataset, representation, or label files.
class FormatError : public Error {
 public:
  using Error::Error;
};

// Bad magic, version, metadata, or payload in a checkpoint file.
class CheckpointError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration values or unknown configuration keys.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Violated preconditions on otherwise well-formed inputs.
class ContractError : public Error {
 public:
  using Error::Error;
};

}  // namespace rankscl
