#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace drywall {

enum class ErrorCode {
  DegenerateInput,
  IdenticalLines,
  NoConsensus,
  DegenerateConfiguration,
  PointAtInfinity,
  NotQuadrilateral,
  NonConvexResult,
  InsufficientEdges,
  NoSegments,
  InsufficientFrames,
  InfeasibleLayout,
  BehindCamera,
  InvalidArgument,
  PreconditionViolation,
  ParseError,
  SchemaError,
  GeometryError,
  IoError,
};

std::string_view to_string(ErrorCode code);

// Every failure the library reports is an Error carrying one of the codes above.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code), message_(message) {}

  ErrorCode code() const noexcept { return code_; }
  // The message without the code prefix.
  const std::string& message() const noexcept { return message_; }

 private:
  ErrorCode code_;
  std::string message_;
};

}  // namespace drywall
