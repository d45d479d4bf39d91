#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace engsf {

// Base class for all library errors so callers can catch engsf failures
// separately from generic std exceptions.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Covariance factorization failed even after the jitter escalation schedule.
class NotPositiveDefinite : public Error {
 public:
  using Error::Error;
};

// Serial-observation square-root update requires a diagonal observation
// covariance.
class NonDiagonalR : public Error {
 public:
  using Error::Error;
};

// Every particle log-likelihood underflowed; the importance weights carry no
// information and resampling would be undefined.
class AllWeightsZero : public Error {
 public:
  using Error::Error;
};

// A grid density integrated to zero mass and cannot be normalized.
class ZeroMass : public Error {
 public:
  using Error::Error;
};

// Two sequences that must be aligned (grids, time series, ensembles) have
// different lengths.
class LengthMismatch : public Error {
 public:
  using Error::Error;
};

// An integrator or model produced a non-finite state component.
class NonFiniteState : public Error {
 public:
  using Error::Error;
};

// Plot emission was asked for a run whose outputs are not on disk.
class MissingRun : public Error {
 public:
  using Error::Error;
};

// Config text could not be parsed; line() is 1-based.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("parse error at line " + std::to_string(line) + ": " + what),
        line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// Config parsed but a field value is out of range; field() names it.
class ValidationError : public Error {
 public:
  ValidationError(const std::string& field, const std::string& what)
      : Error("invalid config field '" + field + "': " + what), field_(field) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

}  // namespace engsf
