#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace attnprobe {

enum class ErrorCode {
  Format,
  CorruptFile,
  Validation,
  Io,
  Parse,
  Alignment,
  Index,
  InvalidArgument,
  NoCandidate,
  Numeric,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::Format: return "format";
    case ErrorCode::CorruptFile: return "corrupt-file";
    case ErrorCode::Validation: return "validation";
    case ErrorCode::Io: return "io";
    case ErrorCode::Parse: return "parse";
    case ErrorCode::Alignment: return "alignment";
    case ErrorCode::Index: return "index";
    case ErrorCode::InvalidArgument: return "invalid-argument";
    case ErrorCode::NoCandidate: return "no-candidate";
    case ErrorCode::Numeric: return "numeric";
  }
  return "unknown";
}

/// Every failure raised by the toolkit carries a stable, machine-readable code.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace attnprobe
