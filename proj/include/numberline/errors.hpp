#pragma once

#include <stdexcept>
#include <string>

namespace numberline {

// Every failure the library reports derives from Error, and each malformed
// input maps to exactly one of the classes below.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Structural problems in on-disk data: shapes, headers, byte lengths, ids.
class SchemaError : public Error {
 public:
  using Error::Error;
};

// Well-formed data with invalid contents (NaN/Inf activations).
class DataError : public Error {
 public:
  using Error::Error;
};

class EmptyDatasetError : public Error {
 public:
  using Error::Error;
};

class RangeError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

// Input that admits no meaningful answer (zero variance, zero covariance).
class DegenerateError : public Error {
 public:
  using Error::Error;
};

class InsufficientGroupsError : public Error {
 public:
  using Error::Error;
};

}  // namespace numberline
