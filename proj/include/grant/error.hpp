#pragma once

#include <stdexcept>
#include <string>

namespace grant {

// Base for every error raised by the library. The CLI maps ConfigError to
// exit code 1 and everything else to exit code 2.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad user input: unknown config keys, invalid hyperparameters, incompatible
// task/loss combinations.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Shape or graph-invariant violations (non-square adjacency, self loops, ...).
class StructuralError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

// Numerically undefined results: degenerate labels, zero kernel, ...
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace grant
