#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace otomech {

enum class ErrorCode {
  UnsupportedFormat,
  CorruptStream,
  EmptyAudio,
  SilentAudio,
  TooShort,
  TooLong,
  DimensionMismatch,
  ZeroVector,
  EmbedderMismatch,
  MissingEmbedding,
  EmptyIndex,
  InsufficientRecords,
  MalformedRow,
  InvalidEnum,
  DuplicateId,
  BuildFailed,
  IoError,
  InvalidArgument,
};

// Stable machine-readable spelling, e.g. "TOO_SHORT". Used in API error bodies.
std::string_view error_code_name(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace otomech
