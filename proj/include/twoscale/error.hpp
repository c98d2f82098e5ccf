#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace twoscale {

enum class ErrorCode {
  InvalidArgument,
  IoError,
  ParseError,
  MissingNetworkFile,
  RoiCountMismatch,
  NonFiniteSample,
  LengthMismatch,
  InvalidLabel,
  DegenerateInput,
  NoDefinedReho,
  SeriesTooShort,
  InvalidParams,
  DegenerateSeries,
  InvalidRate,
  SingularCovariance,
  NonPositiveDiagonal,
  ConvergenceFailure,
  EmptyData,
  TooFewSamples,
  InvalidSpec,
  NotPositiveDefinite,
  InvalidConfig,
  IncompleteRun,
};

std::string_view error_name(ErrorCode code) noexcept;

// Every library failure is reported through this type. `code()` is stable and
// is what the CLI serializes; the message carries the human context.
class Error : public std::runtime_error {
public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

private:
  ErrorCode code_;
};

}  // namespace twoscale
