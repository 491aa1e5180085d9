#pragma once

#include <stdexcept>
#include <string>

namespace isqld {

/// Base class for all library failures.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Argument outside the mathematical domain of an operation
/// (e.g. a cumulant evaluated at or beyond its abscissa of convergence).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A monotone root search could not find a sign change.
class BracketError : public Error {
 public:
  using Error::Error;
};

/// A lookup left the range covered by a discretized surface.
class RangeError : public Error {
 public:
  using Error::Error;
};

/// Malformed partition or grid.
class PartitionError : public Error {
 public:
  using Error::Error;
};

/// The requested event is not rare (the variational problem has no active
/// constraint).
class InfeasibleError : public Error {
 public:
  using Error::Error;
};

/// Monte Carlo estimate rejected because too few replications hit the event.
class InsufficientHitsError : public Error {
 public:
  using Error::Error;
};

/// Invalid user configuration (CLI / JSON).
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace isqld
