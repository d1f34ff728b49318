#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cimllm {

enum class ErrorCode {
  // volume-io
  Io,
  UnsupportedDatatype,
  CorruptHeader,
  DimensionalityNot3D,
  NonFiniteIntensity,
  GeometryMismatch,
  MissingRequiredModality,
  LabelVocabularyViolation,
  ManifestFormat,
  // voxel-analytics
  EmptySource,
  EmptyMask,
  // feature-extraction
  NoAtlas,
  EmptyTumorCore,
  EmptyWholeTumor,
  ConfigFormat,
  // subject-schema
  NonFiniteValue,
  SchemaViolation,
  UnknownGroupName,
  // llm-inference
  Timeout,
  RateLimited,
  ServerError,
  AuthFailure,
  MalformedResponse,
  Transport,
  // evaluation
  ZeroTrials,
  MissingGroundTruth,
  EmptyCohort,
  InvalidArgument,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Every failure raised by the library carries one of the codes above so that
/// callers (and tests) can branch on the category rather than on message text.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  [[nodiscard]] ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace cimllm
