// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ringmaster {

enum class ErrorKind {
  InvalidInput,
  NumericalFailure,
  DegenerateProblem,
  ProtocolViolation,
  Unreachable,
};

constexpr std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::InvalidInput: return "InvalidInput";
    case ErrorKind::NumericalFailure: return "NumericalFailure";
    case ErrorKind::DegenerateProblem: return "DegenerateProblem";
    case ErrorKind::ProtocolViolation: return "ProtocolViolation";
    case ErrorKind::Unreachable: return "Unreachable";
  }
  return "Unknown";
}

/// Library-wide exception; `kind()` lets callers branch without parsing the message.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline void require(bool condition, ErrorKind kind, const char* message) {
  if (!condition) {
    throw Error(kind, message);
  }
}

}  // namespace ringmaster
