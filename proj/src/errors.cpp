#include "uld/errors.hpp"

namespace uld {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kMalformedRow: return "MalformedRow";
    case ErrorCode::kInvariantViolation: return "InvariantViolation";
    case ErrorCode::kUnknownOrganCode: return "UnknownOrganCode";
    case ErrorCode::kNonPositiveWidth: return "NonPositiveWidth";
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kNonPositiveSpacing: return "NonPositiveSpacing";
    case ErrorCode::kDegenerateMeasurement: return "DegenerateMeasurement";
    case ErrorCode::kParamOutOfRange: return "ParamOutOfRange";
    case ErrorCode::kNonPositiveInput: return "NonPositiveInput";
    case ErrorCode::kEmptyConfig: return "EmptyConfig";
    case ErrorCode::kEmptyGroundTruth: return "EmptyGroundTruth";
    case ErrorCode::kInvalidDeParams: return "InvalidDeParams";
    case ErrorCode::kEmptyBlock: return "EmptyBlock";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kTauOutOfRange: return "TauOutOfRange";
    case ErrorCode::kMissingAttribute: return "MissingAttribute";
    case ErrorCode::kInfeasiblePlacement: return "InfeasiblePlacement";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kIoError: return "IoError";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

ParseError::ParseError(ErrorCode code, std::size_t line, std::size_t column,
                       const std::string& message)
    : Error(code, "line " + std::to_string(line) +
                      (column > 0 ? ", column " + std::to_string(column) : std::string()) +
                      ": " + message),
      line_(line),
      column_(column) {}

}  // namespace uld
