#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace dmrac {

enum class ErrorCode {
  DimensionMismatch,
  NotHurwitz,
  NotSymmetric,
  NotPositiveDefinite,
  NonFiniteDerivative,
  NegativeVariance,
  EmptyBatch,
  ZeroFeature,
  EmptyBuffer,
  InsufficientData,
  DomainExit,
  EmptyTrace,
  InvalidConfidence,
  InvalidTolerance,
  UnstructuredScenario,
  ParseError,
  ValidationError,
  IoError,
};

std::string_view to_string(ErrorCode code);

// All recoverable failures in the library are reported through this type.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace dmrac
