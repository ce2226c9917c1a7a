#pragma once

#include <stdexcept>
#include <string>

namespace saml {

// Base of every error raised by the library. kind() is the stable name used in
// machine-readable error reports.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual const char* kind() const noexcept { return "Error"; }
};

class ConfigError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "ConfigError"; }
};

// A caller broke a documented precondition (shape mismatch, non-unit normal...).
class ContractViolation : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "ContractViolation"; }
};

class TrainingError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "TrainingError"; }
};

class NumericError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "NumericError"; }
};

class IoError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "IoError"; }
};

namespace detail {
inline void require(bool condition, const std::string& message) {
  if (!condition) throw ContractViolation(message);
}
}  // namespace detail

}  // namespace saml
