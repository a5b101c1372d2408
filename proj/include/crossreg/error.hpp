#pragma once

#include <stdexcept>
#include <string>

namespace crossreg {

/// Base class of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid parameters or configuration. The CLI maps this to exit code 2.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Input data violates a precondition (empty cloud, degenerate geometry,
/// malformed file). The CLI maps this to exit code 3.
class DataError : public Error {
 public:
  using Error::Error;
};

enum class PlyErrc {
  kOpenFailed,
  kMalformedHeader,
  kUnsupportedFormat,
  kZeroVertices,
  kVertexCountMismatch,
  kNonFiniteCoordinate,
  kBadValue,
  kWriteFailed,
};

class PlyError : public DataError {
 public:
  PlyError(PlyErrc code, const std::string& what) : DataError(what), code_(code) {}
  PlyErrc code() const noexcept { return code_; }

 private:
  PlyErrc code_;
};

}  // namespace crossreg
