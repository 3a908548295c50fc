#pragma once

#include <stdexcept>
#include <string>

namespace nocguard {

enum class ErrorCode {
  InvalidDimension,
  InvalidNode,
  McPlacement,
  InvalidScenario,
  InvalidConfig,
  UndefinedBaseline,
  Shape,
  Length,
  Adjacency,
  InvalidRate,
  NoGradient,
  NonFinite,
  DegenerateClass,
  Stratification,
  CannotPlaceMips,
  CorruptCheckpoint,
  UnsupportedVersion,
  Inference,
  Alignment,
  Divergence,
  Io,
};

const char* to_string(ErrorCode code) noexcept;

// Coarse grouping used for process exit codes.
enum class ErrorCategory { Config, Io, Validation };

ErrorCategory category_of(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace nocguard
