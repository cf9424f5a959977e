#pragma once

#include <stdexcept>
#include <string>

namespace ndiff {

// Failures that map onto CLI exit codes. Precondition violations inside the
// library use the standard exception types (invalid_argument, out_of_range).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Raised when a brute-force table over p^q states is requested beyond the
// configured guard.
class GuardError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace ndiff
