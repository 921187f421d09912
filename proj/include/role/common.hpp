#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace role {

/// Base class for every error raised by this library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes are incompatible with the requested operation.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// NaN or Inf encountered where finite values are required.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Malformed textual input: an ungrammatical command, a bad JSONL line.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration or missing prerequisite artifact.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Every stochastic component draws from an explicitly seeded engine of this type.
using Rng = std::mt19937_64;

}  // namespace role
