#pragma once

#include <stdexcept>
#include <string>

namespace sparsecov {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A scalar argument is outside its admissible range (q <= 0, A <= 1, ...).
class InvalidParameter : public Error {
 public:
  using Error::Error;
};

/// Malformed input data: too few observations, non-finite entries, bad files.
class InvalidInput : public Error {
 public:
  using Error::Error;
};

/// A mathematical precondition failed (eps <= -1, ||Delta||_2 > 1, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

class NotPositiveDefinite : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

/// A randomized construction could not satisfy its constraints.
class ConstructionError : public Error {
 public:
  using Error::Error;
};

}  // namespace sparsecov
