#pragma once

#include <stdexcept>
#include <string>

namespace caplab {

// Error categories used across the library. Each maps to one of the
// documented failure modes of the public operations.
enum class ErrorCode {
  SymmetryViolation,
  NonPositiveA,
  NonPositivePermeability,
  NonPositiveWidth,
  CutoffTooTight,
  EmptySampleSet,
  UnstableMode,
  NoConvergence,
  WindowEscape,
  MissingTimeDerivative,
  RangeEscape,
  SupportEscape,
  InconsistentRuns,
  GridMismatch,
  BoxMismatch,
  EqualStates,
  NoTangency,
  CFLViolation,
  InvariantViolation,
  ScheduleRejected,
  ConfigError,
  IoError,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

inline void require(bool condition, ErrorCode code, const std::string& message) {
  if (!condition) fail(code, message);
}

}  // namespace caplab
