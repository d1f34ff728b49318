#include "cimllm/error.hpp"

namespace cimllm {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::Io: return "Io";
    case ErrorCode::UnsupportedDatatype: return "UnsupportedDatatype";
    case ErrorCode::CorruptHeader: return "CorruptHeader";
    case ErrorCode::DimensionalityNot3D: return "DimensionalityNot3D";
    case ErrorCode::NonFiniteIntensity: return "NonFiniteIntensity";
    case ErrorCode::GeometryMismatch: return "GeometryMismatch";
    case ErrorCode::MissingRequiredModality: return "MissingRequiredModality";
    case ErrorCode::LabelVocabularyViolation: return "LabelVocabularyViolation";
    case ErrorCode::ManifestFormat: return "ManifestFormat";
    case ErrorCode::EmptySource: return "EmptySource";
    case ErrorCode::EmptyMask: return "EmptyMask";
    case ErrorCode::NoAtlas: return "NoAtlas";
    case ErrorCode::EmptyTumorCore: return "EmptyTumorCore";
    case ErrorCode::EmptyWholeTumor: return "EmptyWholeTumor";
    case ErrorCode::ConfigFormat: return "ConfigFormat";
    case ErrorCode::NonFiniteValue: return "NonFiniteValue";
    case ErrorCode::SchemaViolation: return "SchemaViolation";
    case ErrorCode::UnknownGroupName: return "UnknownGroupName";
    case ErrorCode::Timeout: return "Timeout";
    case ErrorCode::RateLimited: return "RateLimited";
    case ErrorCode::ServerError: return "ServerError";
    case ErrorCode::AuthFailure: return "AuthFailure";
    case ErrorCode::MalformedResponse: return "MalformedResponse";
    case ErrorCode::Transport: return "Transport";
    case ErrorCode::ZeroTrials: return "ZeroTrials";
    case ErrorCode::MissingGroundTruth: return "MissingGroundTruth";
    case ErrorCode::EmptyCohort: return "EmptyCohort";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

}  // namespace cimllm
