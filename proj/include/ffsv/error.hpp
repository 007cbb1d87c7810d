#pragma once

#include <stdexcept>
#include <string>

namespace ffsv {

// All validation and processing failures raised by this library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Bad or inconsistent configuration (maps to exit code 2 in the CLI).
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(what) {}
};

}  // namespace ffsv
