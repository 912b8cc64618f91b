#pragma once

#include <stdexcept>
#include <string>

namespace lvqa {

// Machine-checkable failure categories. Callers that need to distinguish
// failure modes (tests, the CLI exit-code logic) match on the code; the
// message carries the human-readable detail.
enum class ErrorCode {
  kFormat,              // malformed container/header/magic/version
  kTruncated,           // payload shorter than the header promised
  kInsufficientFrames,  // video has fewer frames than the sampling plan needs
  kShapeMismatch,       // vector/matrix dimensions disagree
  kLookup,              // file feature provider has no entry for an index
  kCompatibility,       // checkpoint does not match the active configuration
  kState,               // API called out of order (e.g. backward before forward)
  kUndefinedCorrelation,// correlation of a zero-variance sequence
  kFitFailure,          // least-squares system degenerate beyond ridge rescue
  kIo,                  // filesystem-level failure
  kConfig,              // invalid configuration or CLI arguments
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kFormat: return "format";
    case ErrorCode::kTruncated: return "truncated";
    case ErrorCode::kInsufficientFrames: return "insufficient-frames";
    case ErrorCode::kShapeMismatch: return "shape-mismatch";
    case ErrorCode::kLookup: return "lookup";
    case ErrorCode::kCompatibility: return "compatibility";
    case ErrorCode::kState: return "state";
    case ErrorCode::kUndefinedCorrelation: return "undefined-correlation";
    case ErrorCode::kFitFailure: return "fit-failure";
    case ErrorCode::kIo: return "io";
    case ErrorCode::kConfig: return "config";
  }
  return "unknown";
}

}  // namespace lvqa
