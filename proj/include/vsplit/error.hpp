#pragma once

#include <stdexcept>
#include <string>

namespace vsplit {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class IndexError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class DataError : public Error {
 public:
  using Error::Error;
};

class PlanError : public Error {
 public:
  using Error::Error;
};

class ProtocolError : public Error {
 public:
  using Error::Error;
};

/// A concat merge was asked to proceed while a client output is missing.
class StragglerError : public ProtocolError {
 public:
  using ProtocolError::ProtocolError;
};

}  // namespace vsplit
