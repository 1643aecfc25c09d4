#pragma once

#include <stdexcept>
#include <string>

namespace lmprobe {

// Base class for all errors raised by the library. Subclasses map onto the
// CLI exit codes: ConfigError/DataError -> 1, BackendError/ProtocolError -> 2.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Invalid configuration: contradictory flags, out-of-range parameters,
// unsupported mode for the selected backend.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(what) {}
};

// Malformed or inconsistent input data (dataset files, triple dumps).
class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(what) {}
};

// The backend could not be reached or failed to produce a result.
class BackendError : public Error {
 public:
  explicit BackendError(const std::string& what) : Error(what) {}
};

// The backend responded, but the response violates the wire contract
// (bad offsets, wrong counts, invalid JSON shape).
class ProtocolError : public Error {
 public:
  explicit ProtocolError(const std::string& what) : Error(what) {}
};

}  // namespace lmprobe
