#include "drywall/error.hpp"

namespace drywall {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::DegenerateInput: return "DegenerateInput";
    case ErrorCode::IdenticalLines: return "IdenticalLines";
    case ErrorCode::NoConsensus: return "NoConsensus";
    case ErrorCode::DegenerateConfiguration: return "DegenerateConfiguration";
    case ErrorCode::PointAtInfinity: return "PointAtInfinity";
    case ErrorCode::NotQuadrilateral: return "NotQuadrilateral";
    case ErrorCode::NonConvexResult: return "NonConvexResult";
    case ErrorCode::InsufficientEdges: return "InsufficientEdges";
    case ErrorCode::NoSegments: return "NoSegments";
    case ErrorCode::InsufficientFrames: return "InsufficientFrames";
    case ErrorCode::InfeasibleLayout: return "InfeasibleLayout";
    case ErrorCode::BehindCamera: return "BehindCamera";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::PreconditionViolation: return "PreconditionViolation";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::SchemaError: return "SchemaError";
    case ErrorCode::GeometryError: return "GeometryError";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace drywall
