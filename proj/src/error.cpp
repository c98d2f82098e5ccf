#include "twoscale/error.hpp"

namespace twoscale {

std::string_view error_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::MissingNetworkFile: return "MissingNetworkFile";
    case ErrorCode::RoiCountMismatch: return "RoiCountMismatch";
    case ErrorCode::NonFiniteSample: return "NonFiniteSample";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::InvalidLabel: return "InvalidLabel";
    case ErrorCode::DegenerateInput: return "DegenerateInput";
    case ErrorCode::NoDefinedReho: return "NoDefinedReho";
    case ErrorCode::SeriesTooShort: return "SeriesTooShort";
    case ErrorCode::InvalidParams: return "InvalidParams";
    case ErrorCode::DegenerateSeries: return "DegenerateSeries";
    case ErrorCode::InvalidRate: return "InvalidRate";
    case ErrorCode::SingularCovariance: return "SingularCovariance";
    case ErrorCode::NonPositiveDiagonal: return "NonPositiveDiagonal";
    case ErrorCode::ConvergenceFailure: return "ConvergenceFailure";
    case ErrorCode::EmptyData: return "EmptyData";
    case ErrorCode::TooFewSamples: return "TooFewSamples";
    case ErrorCode::InvalidSpec: return "InvalidSpec";
    case ErrorCode::NotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::IncompleteRun: return "IncompleteRun";
  }
  return "Unknown";
}

}  // namespace twoscale
