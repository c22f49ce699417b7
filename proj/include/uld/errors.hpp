#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace uld {

enum class ErrorCode {
  kMalformedRow,
  kInvariantViolation,
  kUnknownOrganCode,
  kNonPositiveWidth,
  kShapeMismatch,
  kNonPositiveSpacing,
  kDegenerateMeasurement,
  kParamOutOfRange,
  kNonPositiveInput,
  kEmptyConfig,
  kEmptyGroundTruth,
  kInvalidDeParams,
  kEmptyBlock,
  kDimensionMismatch,
  kTauOutOfRange,
  kMissingAttribute,
  kInfeasiblePlacement,
  kInvalidArgument,
  kIoError,
};

std::string_view to_string(ErrorCode code);

/// Every recoverable failure in the library is reported through this type.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Parse failure with a 1-based source position. Column 0 means "whole line".
class ParseError : public Error {
 public:
  ParseError(ErrorCode code, std::size_t line, std::size_t column, const std::string& message);

  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

}  // namespace uld
