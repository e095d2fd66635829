#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace vcloc {

enum class ErrorCode {
  // liegroup
  NonOrthogonal,
  // conic
  NotAnEllipse,
  SingularHomography,
  // fit
  DegenerateData,
  NoEllipseSolution,
  // detect
  TemplateLargerThanImage,
  TooFewPoints,
  DegenerateTangents,
  // pose
  BadSignature,
  NotNormalized,
  // fusion
  NonPositiveDt,
  CovarianceNotPSD,
  SingularInnovationCovariance,
  DegenerateRopeGeometry,
  UnsortedStream,
  InvalidScaling,
  // sim
  InvalidScenario,
  // io
  ParseError,
};

std::string_view to_string(ErrorCode code);

/// Exception carrying a machine-checkable error code. All library failures are
/// reported through this type.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace vcloc
