#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace masklift {

enum class ErrorCode {
  kBehindCamera,
  kNonPositiveDepth,
  kOutOfBounds,
  kDuplicateId,
  kDegeneratePrimitive,
  kBadParams,
  kNoForeground,
  kParseError,
  kIndexOutOfRange,
  kInconsistentInput,
  kUnmappedId,
  kLabelOutOfRange,
  kUnknownLabel,
  kShapeMismatch,
  kConfigError,
  kIoError,
  kFormatError,
  kInvariantViolation,
};

std::string_view error_code_name(ErrorCode code);

// Every failure raised by the library carries one of the codes above so the
// CLI can map it onto an exit status.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + what),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

}  // namespace masklift
