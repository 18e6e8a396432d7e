#pragma once

#include <stdexcept>
#include <string>

namespace tl {

// Numeric values are part of the C API (see include/thinlayer/thinlayer.h).
enum class ErrorCode : int {
  Ok = 0,
  InvalidArgument = 1,
  DegenerateObstacle = 2,
  ObstacleTouchesBoundary = 3,
  NonIntegerPeriodCount = 4,
  LayerTooWide = 5,
  FeatureUnderresolved = 6,
  NonPositiveDiffusion = 7,
  UnknownTag = 8,
  LinearSolveFailure = 9,
  PicardDivergence = 10,
  GeometryMeshMismatch = 11,
  AmbiguousClassification = 12,
  InterfaceIterationDiverged = 13,
  RegionMismatch = 14,
  SweepTooShort = 15,
  NonPositiveInput = 16,
  ConfigError = 17,
  IoError = 18,
  AssumptionViolation = 19,
  Internal = 99,
};

const char* error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace tl
