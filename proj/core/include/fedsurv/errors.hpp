#pragma once

#include <stdexcept>
#include <string>

namespace fedsurv {

// Base class for everything this library throws on purpose.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad user-facing configuration: unknown scheme names, invalid fold counts,
// malformed config files. The CLI maps this to exit code 2.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed or inconsistent input data: unreadable CSV rows, negative times,
// indices outside a center's holdings. The CLI maps this to exit code 3.
class DataError : public Error {
 public:
  using Error::Error;
};

// Numerical failure: non-finite values in an objective, a solver that ran out
// of iterations, a singular system. The CLI maps this to exit code 4.
class NumericError : public Error {
 public:
  using Error::Error;
};

// A survival objective was asked to evaluate data without a single observed
// event; the partial likelihood is undefined there.
class NoEventsError : public DataError {
 public:
  using DataError::DataError;
};

// The concordance index was asked for on data with no comparable pair.
class NoComparablePairsError : public DataError {
 public:
  using DataError::DataError;
};

}  // namespace fedsurv
