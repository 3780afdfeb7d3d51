#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mperf {

enum class ErrorKind {
  // platform
  MissingField,
  ParseError,
  DatabaseError,
  // sampling
  EmptyRequest,
  InvalidRequest,
  UnknownEvent,
  SamplingUnsupported,
  PermissionDenied,
  BackendUnavailable,
  TraceFormatError,
  TidMismatch,
  // hotspots
  MetricMissing,
  EmptyInput,
  // roofline
  ChildFailed,
  ReportMissing,
  ReportFormatError,
  ModelError,
  ZeroTime,
  ZeroTraffic,
  // cli
  Usage,
};

inline const char* to_string(ErrorKind kind) noexcept;

/// Process exit codes shared by every subcommand.
enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,
  kExitPlatform = 2,
  kExitChild = 3,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

  /// Exit status the CLI reports when this error escapes a subcommand.
  int exit_code() const noexcept {
    switch (kind_) {
      case ErrorKind::SamplingUnsupported:
      case ErrorKind::PermissionDenied:
      case ErrorKind::BackendUnavailable:
        return kExitPlatform;
      case ErrorKind::ChildFailed:
      case ErrorKind::ReportMissing:
        return kExitChild;
      default:
        return kExitUsage;
    }
  }

 private:
  ErrorKind kind_;
};

inline const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::MissingField: return "MissingField";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::DatabaseError: return "DatabaseError";
    case ErrorKind::EmptyRequest: return "EmptyRequest";
    case ErrorKind::InvalidRequest: return "InvalidRequest";
    case ErrorKind::UnknownEvent: return "UnknownEvent";
    case ErrorKind::SamplingUnsupported: return "SamplingUnsupported";
    case ErrorKind::PermissionDenied: return "PermissionDenied";
    case ErrorKind::BackendUnavailable: return "BackendUnavailable";
    case ErrorKind::TraceFormatError: return "TraceFormatError";
    case ErrorKind::TidMismatch: return "TidMismatch";
    case ErrorKind::MetricMissing: return "MetricMissing";
    case ErrorKind::EmptyInput: return "EmptyInput";
    case ErrorKind::ChildFailed: return "ChildFailed";
    case ErrorKind::ReportMissing: return "ReportMissing";
    case ErrorKind::ReportFormatError: return "ReportFormatError";
    case ErrorKind::ModelError: return "ModelError";
    case ErrorKind::ZeroTime: return "ZeroTime";
    case ErrorKind::ZeroTraffic: return "ZeroTraffic";
    case ErrorKind::Usage: return "Usage";
  }
  return "Unknown";
}

}  // namespace mperf
