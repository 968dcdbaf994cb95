#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace bicsep {

enum class ErrorCode {
  NonIntegrableTail,
  ToleranceNotMet,
  PoleAtEndpoint,
  NonSmoothAtPole,
  IntegrabilityViolation,
  UnsupportedOrder,
  DomainError,
  StiffnessFailure,
  AsymptoticFitFailure,
  MatchingRadiusDisagreement,
  IterationDivergence,
  TailBoundTooLarge,
  SourceIntegrabilityViolation,
  NonPositiveResult,
  ResidualTooLarge,
  IdentityMismatch,
  RecoveryFailed,
  ResolutionTooLow,
  AmbiguousScan,
  TailNotDecaying,
  SpecParseError,
  ValidationError,
  InvalidArgument,
};

std::string_view to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void raise(ErrorCode code, const std::string& what) { throw Error(code, what); }

}  // namespace bicsep
