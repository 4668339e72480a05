#include "pan/error.hpp"

namespace pan {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::OutOfRangeEndpoint: return "OutOfRangeEndpoint";
    case ErrorCode::FeatureShapeMismatch: return "FeatureShapeMismatch";
    case ErrorCode::DuplicateEdge: return "DuplicateEdge";
    case ErrorCode::Overflow: return "Overflow";
    case ErrorCode::NonPositiveTemperature: return "NonPositiveTemperature";
    case ErrorCode::ZeroPartition: return "ZeroPartition";
    case ErrorCode::CodeOutOfRange: return "CodeOutOfRange";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::EmptyGraph: return "EmptyGraph";
    case ErrorCode::NonFiniteValue: return "NonFiniteValue";
    case ErrorCode::NotScalarLoss: return "NotScalarLoss";
    case ErrorCode::BadLabel: return "BadLabel";
    case ErrorCode::DegenerateLabels: return "DegenerateLabels";
    case ErrorCode::MissingFile: return "MissingFile";
    case ErrorCode::RowCountMismatch: return "RowCountMismatch";
    case ErrorCode::NonIntegerField: return "NonIntegerField";
    case ErrorCode::SchemaViolation: return "SchemaViolation";
    case ErrorCode::BadCheckpoint: return "BadCheckpoint";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

}  // namespace pan
