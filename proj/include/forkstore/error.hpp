#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace forkstore {

// Stable error classes. The numeric values travel on the wire and map to CLI exit codes.
enum class ErrorCode : std::uint8_t {
  Ok = 0,
  NotFound = 1,
  TamperDetected = 2,
  KeyNotFound = 3,
  BranchNotFound = 4,
  BranchExists = 5,
  GuardMismatch = 6,
  TypeMismatch = 7,
  KeyMismatch = 8,
  NoCommonAncestor = 9,
  UnresolvedConflicts = 10,
  OutOfRange = 11,
  InvalidArgument = 12,
  Io = 13,
  Corrupt = 14,
  Overflow = 15,
  Transport = 16,
  UnknownOpcode = 17,
};

inline std::string_view error_code_name(ErrorCode c) {
  switch (c) {
    case ErrorCode::Ok: return "Ok";
    case ErrorCode::NotFound: return "NotFound";
    case ErrorCode::TamperDetected: return "TamperDetected";
    case ErrorCode::KeyNotFound: return "KeyNotFound";
    case ErrorCode::BranchNotFound: return "BranchNotFound";
    case ErrorCode::BranchExists: return "BranchExists";
    case ErrorCode::GuardMismatch: return "GuardMismatch";
    case ErrorCode::TypeMismatch: return "TypeMismatch";
    case ErrorCode::KeyMismatch: return "KeyMismatch";
    case ErrorCode::NoCommonAncestor: return "NoCommonAncestor";
    case ErrorCode::UnresolvedConflicts: return "UnresolvedConflicts";
    case ErrorCode::OutOfRange: return "OutOfRange";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::Io: return "Io";
    case ErrorCode::Corrupt: return "Corrupt";
    case ErrorCode::Overflow: return "Overflow";
    case ErrorCode::Transport: return "Transport";
    case ErrorCode::UnknownOpcode: return "UnknownOpcode";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

  // Transport failures are the only class a caller may blindly retry.
  bool retryable() const noexcept { return code_ == ErrorCode::Transport; }

 private:
  ErrorCode code_;
};

}  // namespace forkstore
