#include "vcloc/error.hpp"

namespace vcloc {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::NonOrthogonal: return "NonOrthogonal";
    case ErrorCode::NotAnEllipse: return "NotAnEllipse";
    case ErrorCode::SingularHomography: return "SingularHomography";
    case ErrorCode::DegenerateData: return "DegenerateData";
    case ErrorCode::NoEllipseSolution: return "NoEllipseSolution";
    case ErrorCode::TemplateLargerThanImage: return "TemplateLargerThanImage";
    case ErrorCode::TooFewPoints: return "TooFewPoints";
    case ErrorCode::DegenerateTangents: return "DegenerateTangents";
    case ErrorCode::BadSignature: return "BadSignature";
    case ErrorCode::NotNormalized: return "NotNormalized";
    case ErrorCode::NonPositiveDt: return "NonPositiveDt";
    case ErrorCode::CovarianceNotPSD: return "CovarianceNotPSD";
    case ErrorCode::SingularInnovationCovariance: return "SingularInnovationCovariance";
    case ErrorCode::DegenerateRopeGeometry: return "DegenerateRopeGeometry";
    case ErrorCode::UnsortedStream: return "UnsortedStream";
    case ErrorCode::InvalidScaling: return "InvalidScaling";
    case ErrorCode::InvalidScenario: return "InvalidScenario";
    case ErrorCode::ParseError: return "ParseError";
  }
  return "Unknown";
}

}  // namespace vcloc
