#pragma once

#include <stdexcept>
#include <string>

namespace histocam {

// Every failure raised by the library derives from Error so callers (the CLI in
// particular) can map categories onto exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor extents do not conform.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// An argument is outside its permitted range.
class ParameterError : public Error {
 public:
  using Error::Error;
};

// API misuse: non-scalar loss, backward twice, missing gradient.
class ContractError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Dataset content is unusable (empty class, bad label, undecodable image).
class DataError : public Error {
 public:
  using Error::Error;
};

// A persisted artifact does not match what the reader expects.
class FormatError : public Error {
 public:
  using Error::Error;
};

class LookupError : public Error {
 public:
  using Error::Error;
};

// NaN/Inf encountered during training.
class NumericError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace histocam
