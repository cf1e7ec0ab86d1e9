#include "masklift/error.h"

namespace masklift {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kBehindCamera: return "BehindCamera";
    case ErrorCode::kNonPositiveDepth: return "NonPositiveDepth";
    case ErrorCode::kOutOfBounds: return "OutOfBounds";
    case ErrorCode::kDuplicateId: return "DuplicateId";
    case ErrorCode::kDegeneratePrimitive: return "DegeneratePrimitive";
    case ErrorCode::kBadParams: return "BadParams";
    case ErrorCode::kNoForeground: return "NoForeground";
    case ErrorCode::kParseError: return "ParseError";
    case ErrorCode::kIndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::kInconsistentInput: return "InconsistentInput";
    case ErrorCode::kUnmappedId: return "UnmappedId";
    case ErrorCode::kLabelOutOfRange: return "LabelOutOfRange";
    case ErrorCode::kUnknownLabel: return "UnknownLabel";
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kConfigError: return "ConfigError";
    case ErrorCode::kIoError: return "IoError";
    case ErrorCode::kFormatError: return "FormatError";
    case ErrorCode::kInvariantViolation: return "InvariantViolation";
  }
  return "Unknown";
}

}  // namespace masklift
