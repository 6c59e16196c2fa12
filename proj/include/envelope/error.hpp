#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace envelope {

enum class ErrorCode {
  InvalidInput,
  DimensionMismatch,
  NotPositiveDefinite,
  RankDeficient,
  SingularProjection,
  IllConditionedContext,
  PivotFailure,
  NumericalFailure,
  SingularDesign,
  FoldTooSmall,
};

std::string_view to_string(ErrorCode code);

/// Every failure raised by the library carries one of the codes above so
/// callers (the CLI in particular) can map it to an exit status.
class EnvelopeError : public std::runtime_error {
 public:
  EnvelopeError(ErrorCode code, const std::string& what);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& what);

}  // namespace envelope
