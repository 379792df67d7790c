#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace sphindex {

enum class ErrorCode {
  // geometry
  NearZeroVector,
  AntipodalPoint,
  BaseMismatch,
  NotUnitVector,
  DimensionMismatch,
  // sampling
  DegenerateCross,
  // losses and tuning
  InvalidLambda,
  AllZeroResiduals,
  OutOfRangeDelta,
  PoleAtK,
  // estimation
  SingularDesign,
  NoConvergence,
  OutsideTheta,
  InvalidBeta,
  BoundarySingularity,
  NoValidStart,
  NonFinite,
  InvalidDataset,
  // diagnostics
  SingularW0,
  SingularM0,
  IndexOutOfRange,
  // bootstrap
  RefitFailure,
  FailureRateExceeded,
  // input and configuration
  NegativeComposition,
  ZeroRowSum,
  UnknownColumn,
  MalformedResults,
  ConfigError,
  DataError,
};

std::string_view to_string(ErrorCode code) noexcept;

// Coarse classification used for CLI exit codes.
enum class ErrorCategory { Config, Data, Numerical };

ErrorCategory category(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace sphindex
