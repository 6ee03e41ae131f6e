#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace hflow {

enum class ErrorCode {
  NonpositiveSpacing,
  DegenerateBox,
  EmptyDomain,
  NonpositiveH,
  NotMeanConvex,
  NotCompact,
  SafetyOutOfRange,
  DtTooLarge,
  WindowTooHigh,
  GradientHypothesisFailed,
  HHypothesisFailed,
  NeedTwoHeights,
  OutOfDomain,
  Extinct,
  NonpositiveKappa,
  InsufficientSnapshots,
  InvalidArgument,
  Io,
  Config,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::NonpositiveSpacing: return "NONPOSITIVE_SPACING";
    case ErrorCode::DegenerateBox: return "DEGENERATE_BOX";
    case ErrorCode::EmptyDomain: return "EMPTY_DOMAIN";
    case ErrorCode::NonpositiveH: return "NONPOSITIVE_H";
    case ErrorCode::NotMeanConvex: return "NOT_MEAN_CONVEX";
    case ErrorCode::NotCompact: return "NOT_COMPACT";
    case ErrorCode::SafetyOutOfRange: return "SAFETY_OUT_OF_RANGE";
    case ErrorCode::DtTooLarge: return "DT_TOO_LARGE";
    case ErrorCode::WindowTooHigh: return "WINDOW_TOO_HIGH";
    case ErrorCode::GradientHypothesisFailed: return "GRADIENT_HYPOTHESIS_FAILED";
    case ErrorCode::HHypothesisFailed: return "H_HYPOTHESIS_FAILED";
    case ErrorCode::NeedTwoHeights: return "NEED_TWO_HEIGHTS";
    case ErrorCode::OutOfDomain: return "OUT_OF_DOMAIN";
    case ErrorCode::Extinct: return "EXTINCT";
    case ErrorCode::NonpositiveKappa: return "NONPOSITIVE_KAPPA";
    case ErrorCode::InsufficientSnapshots: return "INSUFFICIENT_SNAPSHOTS";
    case ErrorCode::InvalidArgument: return "INVALID_ARGUMENT";
    case ErrorCode::Io: return "IO_ERROR";
    case ErrorCode::Config: return "CONFIG_ERROR";
  }
  return "UNKNOWN";
}

/// Exception carrying a machine-readable code. Every failure the library
/// reports goes through this type.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail)
      : std::runtime_error(std::string(to_string(code)) + ": " + detail), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& detail) {
  throw Error(code, detail);
}

}  // namespace hflow
