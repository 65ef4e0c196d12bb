#pragma once

#include <stdexcept>
#include <string>

namespace retdist {

/// Caller passed an argument outside an operation's domain.
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Input data could not be ingested or is unusable for the requested analysis.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Data is well-formed but degenerate (e.g. zero volatility, identical samples).
class DegenerateInputError : public DataError {
 public:
  using DataError::DataError;
};

/// A numerical procedure failed: no meaningful scaling, overflow, non-convergence.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidScalingError : public NumericError {
 public:
  using NumericError::NumericError;
};

class GenerationError : public NumericError {
 public:
  using NumericError::NumericError;
};

}  // namespace retdist
