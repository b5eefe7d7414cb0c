#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace wmtrace {

enum class ErrorCode {
  CarrierTooSmall,
  ShapeError,
  EmptyRequest,
  CapacityError,
  KeyStoreError,
  InvalidIdentity,
  DegenerateEmbedding,
  EmptyBatch,
  DegenerateDataset,
  InvalidArgument,
  FormatError,
  IoError,
};

std::string_view to_string(ErrorCode code);

// All domain failures surface as this exception; code() identifies the
// contract that was violated.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::CarrierTooSmall: return "CarrierTooSmall";
    case ErrorCode::ShapeError: return "ShapeError";
    case ErrorCode::EmptyRequest: return "EmptyRequest";
    case ErrorCode::CapacityError: return "CapacityError";
    case ErrorCode::KeyStoreError: return "KeyStoreError";
    case ErrorCode::InvalidIdentity: return "InvalidIdentity";
    case ErrorCode::DegenerateEmbedding: return "DegenerateEmbedding";
    case ErrorCode::EmptyBatch: return "EmptyBatch";
    case ErrorCode::DegenerateDataset: return "DegenerateDataset";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::FormatError: return "FormatError";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace wmtrace
