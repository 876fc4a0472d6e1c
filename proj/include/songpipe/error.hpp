/**
 * @file error.hpp
 * @brief Exception type shared by every songpipe module.
 */
#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace songpipe {

/// @brief Category of a songpipe failure. Callers branch on this, not on text.
enum class ErrorCode {
  kInvalidArgument,
  kInvalidScore,
  kMalformedHeader,
  kTruncated,
  kUnmatchedNoteOn,
  kNonFourFour,
  kUnknownSectionLabel,
  kParse,
  kUnsupportedCodec,
  kEmptyInput,
  kShapeMismatch,
  kNoTempoEvidence,
  kNoCandidate,
  kPlanning,
  kIo,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid argument";
    case ErrorCode::kInvalidScore: return "invalid score";
    case ErrorCode::kMalformedHeader: return "malformed header";
    case ErrorCode::kTruncated: return "truncated input";
    case ErrorCode::kUnmatchedNoteOn: return "unmatched note-on";
    case ErrorCode::kNonFourFour: return "non-4/4 time signature";
    case ErrorCode::kUnknownSectionLabel: return "unknown section label";
    case ErrorCode::kParse: return "parse error";
    case ErrorCode::kUnsupportedCodec: return "unsupported codec";
    case ErrorCode::kEmptyInput: return "empty input";
    case ErrorCode::kShapeMismatch: return "shape mismatch";
    case ErrorCode::kNoTempoEvidence: return "no tempo evidence";
    case ErrorCode::kNoCandidate: return "no admissible candidate";
    case ErrorCode::kPlanning: return "planning error";
    case ErrorCode::kIo: return "i/o error";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail)
      : std::runtime_error(std::string(to_string(code)) + ": " + detail),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace songpipe
