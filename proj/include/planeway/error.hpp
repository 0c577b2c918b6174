#pragma once

#include <stdexcept>
#include <string>

namespace planeway {

enum class ErrorCode {
  DegenerateInput,
  EmptyCloud,
  NoTraversablePlane,
  EmptyGrid,
  SingularSystem,
  NonFiniteValue,
  NoPlaneNearStart,
  NoPlaneNearGoal,
  Unreachable,
  InfeasibleInit,
  OutOfDomain,
  ParseError,
  IoError,
  ConfigError,
};

const char* to_string(ErrorCode code);

/// Every failure in the library surfaces as this exception; `code()` says which.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::DegenerateInput: return "DegenerateInput";
    case ErrorCode::EmptyCloud: return "EmptyCloud";
    case ErrorCode::NoTraversablePlane: return "NoTraversablePlane";
    case ErrorCode::EmptyGrid: return "EmptyGrid";
    case ErrorCode::SingularSystem: return "SingularSystem";
    case ErrorCode::NonFiniteValue: return "NonFiniteValue";
    case ErrorCode::NoPlaneNearStart: return "NoPlaneNearStart";
    case ErrorCode::NoPlaneNearGoal: return "NoPlaneNearGoal";
    case ErrorCode::Unreachable: return "Unreachable";
    case ErrorCode::InfeasibleInit: return "InfeasibleInit";
    case ErrorCode::OutOfDomain: return "OutOfDomain";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

}  // namespace planeway
