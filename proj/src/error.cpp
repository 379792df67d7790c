#include "sphindex/error.hpp"

namespace sphindex {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::NearZeroVector: return "NearZeroVector";
    case ErrorCode::AntipodalPoint: return "AntipodalPoint";
    case ErrorCode::BaseMismatch: return "BaseMismatch";
    case ErrorCode::NotUnitVector: return "NotUnitVector";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::DegenerateCross: return "DegenerateCross";
    case ErrorCode::InvalidLambda: return "InvalidLambda";
    case ErrorCode::AllZeroResiduals: return "AllZeroResiduals";
    case ErrorCode::OutOfRangeDelta: return "OutOfRangeDelta";
    case ErrorCode::PoleAtK: return "PoleAtK";
    case ErrorCode::SingularDesign: return "SingularDesign";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::OutsideTheta: return "OutsideTheta";
    case ErrorCode::InvalidBeta: return "InvalidBeta";
    case ErrorCode::BoundarySingularity: return "BoundarySingularity";
    case ErrorCode::NoValidStart: return "NoValidStart";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::InvalidDataset: return "InvalidDataset";
    case ErrorCode::SingularW0: return "SingularW0";
    case ErrorCode::SingularM0: return "SingularM0";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::RefitFailure: return "RefitFailure";
    case ErrorCode::FailureRateExceeded: return "FailureRateExceeded";
    case ErrorCode::NegativeComposition: return "NegativeComposition";
    case ErrorCode::ZeroRowSum: return "ZeroRowSum";
    case ErrorCode::UnknownColumn: return "UnknownColumn";
    case ErrorCode::MalformedResults: return "MalformedResults";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::DataError: return "DataError";
  }
  return "Unknown";
}

ErrorCategory category(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::ConfigError:
    case ErrorCode::OutOfRangeDelta:
    case ErrorCode::InvalidLambda:
      return ErrorCategory::Config;
    case ErrorCode::NegativeComposition:
    case ErrorCode::ZeroRowSum:
    case ErrorCode::UnknownColumn:
    case ErrorCode::MalformedResults:
    case ErrorCode::DataError:
    case ErrorCode::InvalidDataset:
    case ErrorCode::NotUnitVector:
    case ErrorCode::DimensionMismatch:
      return ErrorCategory::Data;
    default:
      return ErrorCategory::Numerical;
  }
}

}  // namespace sphindex
