#pragma once

#include <stdexcept>
#include <string>

namespace spsn {

// Each error family maps to one CLI exit code (see tools/main.cpp).

class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

enum class DataErrorKind {
  MagicMismatch,
  VersionMismatch,
  Truncated,
  ChecksumMismatch,
  InvariantViolation,
  ShapeMismatch,
};

class DataError : public std::runtime_error {
public:
  DataError(DataErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  DataErrorKind kind() const noexcept { return kind_; }

private:
  DataErrorKind kind_;
};

class NumericError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

}  // namespace spsn
