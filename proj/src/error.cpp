#include "envelope/error.hpp"

namespace envelope {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidInput: return "InvalidInput";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorCode::RankDeficient: return "RankDeficient";
    case ErrorCode::SingularProjection: return "SingularProjection";
    case ErrorCode::IllConditionedContext: return "IllConditionedContext";
    case ErrorCode::PivotFailure: return "PivotFailure";
    case ErrorCode::NumericalFailure: return "NumericalFailure";
    case ErrorCode::SingularDesign: return "SingularDesign";
    case ErrorCode::FoldTooSmall: return "FoldTooSmall";
  }
  return "Unknown";
}

EnvelopeError::EnvelopeError(ErrorCode code, const std::string& what)
    : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

void fail(ErrorCode code, const std::string& what) { throw EnvelopeError(code, what); }

}  // namespace envelope
