#pragma once

#include <stdexcept>
#include <string>

namespace lamina {

// Error codes cover every failure mode the library reports. The CLI maps any
// Error to exit status 1; check failures in reports map to exit status 2.
enum class ErrorCode {
  SingularInput,
  NoConvergence,
  BarycenterViolation,
  NotALeaf,
  NotRotation,
  UnknownIntegrand,
  BadForm,
  NotNegativeDet,
  NonpositiveDelta,
  MismatchedInputs,
  UnknownGenerator,
  ScheduleExhausted,
  SubdivisionOverflow,
  NotWeaklyOriented,
  DepthExceeded,
  NotUnitNormal,
  IncompatibleSplit,
  ConfigInvalid,
};

inline const char* error_code_name(ErrorCode c) {
  switch (c) {
    case ErrorCode::SingularInput: return "SingularInput";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::BarycenterViolation: return "BarycenterViolation";
    case ErrorCode::NotALeaf: return "NotALeaf";
    case ErrorCode::NotRotation: return "NotRotation";
    case ErrorCode::UnknownIntegrand: return "UnknownIntegrand";
    case ErrorCode::BadForm: return "BadForm";
    case ErrorCode::NotNegativeDet: return "NotNegativeDet";
    case ErrorCode::NonpositiveDelta: return "NonpositiveDelta";
    case ErrorCode::MismatchedInputs: return "MismatchedInputs";
    case ErrorCode::UnknownGenerator: return "UnknownGenerator";
    case ErrorCode::ScheduleExhausted: return "ScheduleExhausted";
    case ErrorCode::SubdivisionOverflow: return "SubdivisionOverflow";
    case ErrorCode::NotWeaklyOriented: return "NotWeaklyOriented";
    case ErrorCode::DepthExceeded: return "DepthExceeded";
    case ErrorCode::NotUnitNormal: return "NotUnitNormal";
    case ErrorCode::IncompatibleSplit: return "IncompatibleSplit";
    case ErrorCode::ConfigInvalid: return "ConfigInvalid";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + what),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

}  // namespace lamina
