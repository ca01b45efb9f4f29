#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace neurocount {

enum class ErrorCode {
  DimensionMismatch,
  BitDepthError,
  MissingFile,
  UnsupportedFormat,
  IoError,
  ExtentMismatch,
  MissingTile,
  DuplicateTile,
  TooManyComponents,
  EmptyGroundTruth,
  InvalidMode,
  InvalidArgument,
  PlacementFailure,
  NoDetectionsAndNoTruth,
  ZeroGroundTruth,
  DegenerateSeries,
  StemMismatch,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::BitDepthError: return "BitDepthError";
    case ErrorCode::MissingFile: return "MissingFile";
    case ErrorCode::UnsupportedFormat: return "UnsupportedFormat";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::ExtentMismatch: return "ExtentMismatch";
    case ErrorCode::MissingTile: return "MissingTile";
    case ErrorCode::DuplicateTile: return "DuplicateTile";
    case ErrorCode::TooManyComponents: return "TooManyComponents";
    case ErrorCode::EmptyGroundTruth: return "EmptyGroundTruth";
    case ErrorCode::InvalidMode: return "InvalidMode";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::PlacementFailure: return "PlacementFailure";
    case ErrorCode::NoDetectionsAndNoTruth: return "NoDetectionsAndNoTruth";
    case ErrorCode::ZeroGroundTruth: return "ZeroGroundTruth";
    case ErrorCode::DegenerateSeries: return "DegenerateSeries";
    case ErrorCode::StemMismatch: return "StemMismatch";
  }
  return "Unknown";
}

/// Input-validation failures map to CLI exit code 2, everything else to 3.
constexpr bool is_input_error(ErrorCode code) {
  switch (code) {
    case ErrorCode::DimensionMismatch:
    case ErrorCode::BitDepthError:
    case ErrorCode::MissingFile:
    case ErrorCode::UnsupportedFormat:
    case ErrorCode::ExtentMismatch:
    case ErrorCode::MissingTile:
    case ErrorCode::DuplicateTile:
    case ErrorCode::EmptyGroundTruth:
    case ErrorCode::InvalidMode:
    case ErrorCode::InvalidArgument:
    case ErrorCode::StemMismatch:
    case ErrorCode::ZeroGroundTruth:
    case ErrorCode::NoDetectionsAndNoTruth:
      return true;
    default:
      return false;
  }
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace neurocount
