#include "dmrac/error.hpp"

namespace dmrac {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NotHurwitz: return "NotHurwitz";
    case ErrorCode::NotSymmetric: return "NotSymmetric";
    case ErrorCode::NotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorCode::NonFiniteDerivative: return "NonFiniteDerivative";
    case ErrorCode::NegativeVariance: return "NegativeVariance";
    case ErrorCode::EmptyBatch: return "EmptyBatch";
    case ErrorCode::ZeroFeature: return "ZeroFeature";
    case ErrorCode::EmptyBuffer: return "EmptyBuffer";
    case ErrorCode::InsufficientData: return "InsufficientData";
    case ErrorCode::DomainExit: return "DomainExit";
    case ErrorCode::EmptyTrace: return "EmptyTrace";
    case ErrorCode::InvalidConfidence: return "InvalidConfidence";
    case ErrorCode::InvalidTolerance: return "InvalidTolerance";
    case ErrorCode::UnstructuredScenario: return "UnstructuredScenario";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::ValidationError: return "ValidationError";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace dmrac
