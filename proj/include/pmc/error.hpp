#pragma once

#include <stdexcept>
#include <string>

namespace pmc {

enum class ErrorKind {
  MalformedFile,
  ValidationError,
  VersionMismatch,
  SegmentTooShort,
  SequenceTooShort,
  ShapeMismatch,
  TargetTooLong,
  DegenerateAnnotation,
  NonFiniteLoss,
  EmptyDataset,
  DivergedLoss,
  EmptyInput,
  LengthMismatch,
  NoCompatibleReference,
  UnknownConcept,
  IndexOutOfRange,
  DegenerateLength,
  NotFound,
  Conflict,
};

inline const char* to_string(ErrorKind k) {
  switch (k) {
    case ErrorKind::MalformedFile: return "MalformedFile";
    case ErrorKind::ValidationError: return "ValidationError";
    case ErrorKind::VersionMismatch: return "VersionMismatch";
    case ErrorKind::SegmentTooShort: return "SegmentTooShort";
    case ErrorKind::SequenceTooShort: return "SequenceTooShort";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::TargetTooLong: return "TargetTooLong";
    case ErrorKind::DegenerateAnnotation: return "DegenerateAnnotation";
    case ErrorKind::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorKind::EmptyDataset: return "EmptyDataset";
    case ErrorKind::DivergedLoss: return "DivergedLoss";
    case ErrorKind::EmptyInput: return "EmptyInput";
    case ErrorKind::LengthMismatch: return "LengthMismatch";
    case ErrorKind::NoCompatibleReference: return "NoCompatibleReference";
    case ErrorKind::UnknownConcept: return "UnknownConcept";
    case ErrorKind::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorKind::DegenerateLength: return "DegenerateLength";
    case ErrorKind::NotFound: return "NotFound";
    case ErrorKind::Conflict: return "Conflict";
  }
  return "Unknown";
}

/// Every failure raised by the library carries a machine-readable kind.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

inline void require(bool cond, ErrorKind kind, const std::string& what) {
  if (!cond) fail(kind, what);
}

}  // namespace pmc
