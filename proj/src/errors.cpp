#include "errors.hpp"

namespace tl {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::Ok: return "Ok";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::DegenerateObstacle: return "DegenerateObstacle";
    case ErrorCode::ObstacleTouchesBoundary: return "ObstacleTouchesBoundary";
    case ErrorCode::NonIntegerPeriodCount: return "NonIntegerPeriodCount";
    case ErrorCode::LayerTooWide: return "LayerTooWide";
    case ErrorCode::FeatureUnderresolved: return "FeatureUnderresolved";
    case ErrorCode::NonPositiveDiffusion: return "NonPositiveDiffusion";
    case ErrorCode::UnknownTag: return "UnknownTag";
    case ErrorCode::LinearSolveFailure: return "LinearSolveFailure";
    case ErrorCode::PicardDivergence: return "PicardDivergence";
    case ErrorCode::GeometryMeshMismatch: return "GeometryMeshMismatch";
    case ErrorCode::AmbiguousClassification: return "AmbiguousClassification";
    case ErrorCode::InterfaceIterationDiverged: return "InterfaceIterationDiverged";
    case ErrorCode::RegionMismatch: return "RegionMismatch";
    case ErrorCode::SweepTooShort: return "SweepTooShort";
    case ErrorCode::NonPositiveInput: return "NonPositiveInput";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::AssumptionViolation: return "AssumptionViolation";
    case ErrorCode::Internal: return "Internal";
  }
  return "Unknown";
}

}  // namespace tl
