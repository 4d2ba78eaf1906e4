#pragma once

#include <stdexcept>
#include <string>

namespace stochreg {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class IndexError : public Error {
 public:
  using Error::Error;
};

/// Invalid parameters or a request the current configuration cannot serve.
class ConfigError : public Error {
 public:
  using Error::Error;
};

class EmptyTraceError : public Error {
 public:
  using Error::Error;
};

/// An inner numerical solver (CG) failed to reach its tolerance.
class SolverError : public Error {
 public:
  using Error::Error;
};

}  // namespace stochreg
