#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace pgc {

enum class ErrorCode {
  NotPositiveDefinite,
  NotPositiveSemiDefinite,
  DomainError,
  ConvergenceError,
  DimensionMismatch,
  InfeasibleEnumeration,
  DegenerateTail,
  InsufficientData,
  RegimeError,
  NumericalError,
  IoError,
  ParseError,
  EmptyData,
  UsageError,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::NotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorCode::NotPositiveSemiDefinite: return "NotPositiveSemiDefinite";
    case ErrorCode::DomainError: return "DomainError";
    case ErrorCode::ConvergenceError: return "ConvergenceError";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::InfeasibleEnumeration: return "InfeasibleEnumeration";
    case ErrorCode::DegenerateTail: return "DegenerateTail";
    case ErrorCode::InsufficientData: return "InsufficientData";
    case ErrorCode::RegimeError: return "RegimeError";
    case ErrorCode::NumericalError: return "NumericalError";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::EmptyData: return "EmptyData";
    case ErrorCode::UsageError: return "UsageError";
  }
  return "Unknown";
}

/// Process exit status used by the command-line tool: 2 for usage or
/// configuration problems (including unreadable or unwritable paths), 3 for
/// data problems, 4 for numerical failures.
constexpr int exit_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::NotPositiveDefinite:
    case ErrorCode::DomainError:
    case ErrorCode::DimensionMismatch:
    case ErrorCode::UsageError:
    case ErrorCode::IoError:
      return 2;
    case ErrorCode::DegenerateTail:
    case ErrorCode::InsufficientData:
    case ErrorCode::ParseError:
    case ErrorCode::EmptyData:
      return 3;
    case ErrorCode::NotPositiveSemiDefinite:
    case ErrorCode::ConvergenceError:
    case ErrorCode::InfeasibleEnumeration:
    case ErrorCode::RegimeError:
    case ErrorCode::NumericalError:
      return 4;
  }
  return 4;
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code), detail_(message) {}

  ErrorCode code() const noexcept { return code_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace pgc
