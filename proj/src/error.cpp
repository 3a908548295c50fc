#include "nocguard/error.hpp"

namespace nocguard {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidDimension: return "invalid-dimension";
    case ErrorCode::InvalidNode: return "invalid-node";
    case ErrorCode::McPlacement: return "mc-placement";
    case ErrorCode::InvalidScenario: return "invalid-scenario";
    case ErrorCode::InvalidConfig: return "invalid-config";
    case ErrorCode::UndefinedBaseline: return "undefined-baseline";
    case ErrorCode::Shape: return "shape";
    case ErrorCode::Length: return "length";
    case ErrorCode::Adjacency: return "adjacency";
    case ErrorCode::InvalidRate: return "invalid-rate";
    case ErrorCode::NoGradient: return "no-gradient";
    case ErrorCode::NonFinite: return "non-finite";
    case ErrorCode::DegenerateClass: return "degenerate-class";
    case ErrorCode::Stratification: return "stratification";
    case ErrorCode::CannotPlaceMips: return "cannot-place-mips";
    case ErrorCode::CorruptCheckpoint: return "corrupt-checkpoint";
    case ErrorCode::UnsupportedVersion: return "unsupported-version";
    case ErrorCode::Inference: return "inference";
    case ErrorCode::Alignment: return "alignment";
    case ErrorCode::Divergence: return "divergence";
    case ErrorCode::Io: return "io";
  }
  return "unknown";
}

ErrorCategory category_of(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidDimension:
    case ErrorCode::McPlacement:
    case ErrorCode::InvalidScenario:
    case ErrorCode::InvalidConfig:
    case ErrorCode::InvalidRate:
    case ErrorCode::CannotPlaceMips:
      return ErrorCategory::Config;
    case ErrorCode::Io:
    case ErrorCode::CorruptCheckpoint:
    case ErrorCode::UnsupportedVersion:
      return ErrorCategory::Io;
    default:
      return ErrorCategory::Validation;
  }
}

}  // namespace nocguard
