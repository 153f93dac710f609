#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace postop {

enum class ErrorCode {
  // nifti
  BadMagic,
  UnsupportedDatatype,
  TruncatedData,
  HeaderInconsistent,
  LossyConversion,
  NonIntegerLabels,
  LabelOutOfRange,
  // geometry / preprocess
  SingularTransform,
  ConstantImage,
  EmptyMask,
  DegenerateMask,
  MissingReferenceSequence,
  GeometryMismatch,
  // eor / cohort
  NegativeVolume,
  EmptyInput,
  UnmappedLabel,
  TooFewCases,
  // phantom
  InvalidSpec,
  NotNormalized,
  // plumbing
  InvalidConfig,
  IoError,
};

constexpr std::string_view error_name(ErrorCode c) {
  switch (c) {
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::UnsupportedDatatype: return "UnsupportedDatatype";
    case ErrorCode::TruncatedData: return "TruncatedData";
    case ErrorCode::HeaderInconsistent: return "HeaderInconsistent";
    case ErrorCode::LossyConversion: return "LossyConversion";
    case ErrorCode::NonIntegerLabels: return "NonIntegerLabels";
    case ErrorCode::LabelOutOfRange: return "LabelOutOfRange";
    case ErrorCode::SingularTransform: return "SingularTransform";
    case ErrorCode::ConstantImage: return "ConstantImage";
    case ErrorCode::EmptyMask: return "EmptyMask";
    case ErrorCode::DegenerateMask: return "DegenerateMask";
    case ErrorCode::MissingReferenceSequence: return "MissingReferenceSequence";
    case ErrorCode::GeometryMismatch: return "GeometryMismatch";
    case ErrorCode::NegativeVolume: return "NegativeVolume";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::UnmappedLabel: return "UnmappedLabel";
    case ErrorCode::TooFewCases: return "TooFewCases";
    case ErrorCode::InvalidSpec: return "InvalidSpec";
    case ErrorCode::NotNormalized: return "NotNormalized";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

/// Exception thrown by every module. `code()` is stable and machine-readable;
/// `what()` carries the human detail.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail)
      : std::runtime_error(std::string(error_name(code)) + ": " + detail), code_(code) {}

  ErrorCode code() const noexcept { return code_; }
  std::string_view name() const noexcept { return error_name(code_); }

 private:
  ErrorCode code_;
};

}  // namespace postop
