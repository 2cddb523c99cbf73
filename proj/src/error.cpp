#include "otomech/error.hpp"

namespace otomech {

std::string_view error_code_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::UnsupportedFormat: return "UNSUPPORTED_FORMAT";
    case ErrorCode::CorruptStream: return "CORRUPT_STREAM";
    case ErrorCode::EmptyAudio: return "EMPTY_AUDIO";
    case ErrorCode::SilentAudio: return "SILENT_AUDIO";
    case ErrorCode::TooShort: return "TOO_SHORT";
    case ErrorCode::TooLong: return "TOO_LONG";
    case ErrorCode::DimensionMismatch: return "DIMENSION_MISMATCH";
    case ErrorCode::ZeroVector: return "ZERO_VECTOR";
    case ErrorCode::EmbedderMismatch: return "EMBEDDER_MISMATCH";
    case ErrorCode::MissingEmbedding: return "MISSING_EMBEDDING";
    case ErrorCode::EmptyIndex: return "EMPTY_INDEX";
    case ErrorCode::InsufficientRecords: return "INSUFFICIENT_RECORDS";
    case ErrorCode::MalformedRow: return "MALFORMED_ROW";
    case ErrorCode::InvalidEnum: return "INVALID_ENUM";
    case ErrorCode::DuplicateId: return "DUPLICATE_ID";
    case ErrorCode::BuildFailed: return "BUILD_FAILED";
    case ErrorCode::IoError: return "IO_ERROR";
    case ErrorCode::InvalidArgument: return "INVALID_ARGUMENT";
  }
  return "UNKNOWN";
}

}  // namespace otomech
