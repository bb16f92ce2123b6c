#pragma once

#include <stdexcept>
#include <string>

namespace essop {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite, non-positive or otherwise out-of-domain numeric input.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// An LFSR seed that would lock the register (all-zero) or collide.
class InvalidSeedError : public Error {
 public:
  using Error::Error;
};

/// A caller broke an operation's precondition (shape, length, range).
class ContractError : public Error {
 public:
  using Error::Error;
};

/// File or stream could not be read, written or parsed.
class IoError : public Error {
 public:
  using Error::Error;
};

/// A configuration value failed validation; carries the offending key.
class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& message)
      : Error(field + ": " + message), field_(std::move(field)) {}

  [[nodiscard]] const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

}  // namespace essop
