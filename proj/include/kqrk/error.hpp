#pragma once

#include <stdexcept>
#include <string>

namespace kqrk {

enum class ErrorKind {
  InvalidArgument,
  ZeroRow,
  NonIntegerQuantile,
  ConvergenceFailure,
  TooManySubsets,
  InvalidSpec,
  IndexOutOfRange,
  EmptyAdmissibleSet,
  WindowTooLarge,
  InvalidRegime,
  FullRankViolation,
  NonPositiveC,
  ZeroCorruption,
  IoError,
  FormatError,
};

const char* to_string(ErrorKind kind) noexcept;

/// Every failure raised by the library carries a kind so callers (notably the
/// CLI) can map it to an exit code without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

  /// Validation failures are the caller's fault; everything else is runtime.
  bool is_validation() const noexcept {
    switch (kind_) {
      case ErrorKind::ConvergenceFailure:
      case ErrorKind::IoError:
      case ErrorKind::FormatError:
        return false;
      default:
        return true;
    }
  }

 private:
  ErrorKind kind_;
};

inline const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::ZeroRow: return "ZeroRow";
    case ErrorKind::NonIntegerQuantile: return "NonIntegerQuantile";
    case ErrorKind::ConvergenceFailure: return "ConvergenceFailure";
    case ErrorKind::TooManySubsets: return "TooManySubsets";
    case ErrorKind::InvalidSpec: return "InvalidSpec";
    case ErrorKind::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorKind::EmptyAdmissibleSet: return "EmptyAdmissibleSet";
    case ErrorKind::WindowTooLarge: return "WindowTooLarge";
    case ErrorKind::InvalidRegime: return "InvalidRegime";
    case ErrorKind::FullRankViolation: return "FullRankViolation";
    case ErrorKind::NonPositiveC: return "NonPositiveC";
    case ErrorKind::ZeroCorruption: return "ZeroCorruption";
    case ErrorKind::IoError: return "IoError";
    case ErrorKind::FormatError: return "FormatError";
  }
  return "Unknown";
}

}  // namespace kqrk
