#include "bicsep/errors.hpp"

namespace bicsep {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::NonIntegrableTail: return "NonIntegrableTail";
    case ErrorCode::ToleranceNotMet: return "ToleranceNotMet";
    case ErrorCode::PoleAtEndpoint: return "PoleAtEndpoint";
    case ErrorCode::NonSmoothAtPole: return "NonSmoothAtPole";
    case ErrorCode::IntegrabilityViolation: return "IntegrabilityViolation";
    case ErrorCode::UnsupportedOrder: return "UnsupportedOrder";
    case ErrorCode::DomainError: return "DomainError";
    case ErrorCode::StiffnessFailure: return "StiffnessFailure";
    case ErrorCode::AsymptoticFitFailure: return "AsymptoticFitFailure";
    case ErrorCode::MatchingRadiusDisagreement: return "MatchingRadiusDisagreement";
    case ErrorCode::IterationDivergence: return "IterationDivergence";
    case ErrorCode::TailBoundTooLarge: return "TailBoundTooLarge";
    case ErrorCode::SourceIntegrabilityViolation: return "SourceIntegrabilityViolation";
    case ErrorCode::NonPositiveResult: return "NonPositiveResult";
    case ErrorCode::ResidualTooLarge: return "ResidualTooLarge";
    case ErrorCode::IdentityMismatch: return "IdentityMismatch";
    case ErrorCode::RecoveryFailed: return "RecoveryFailed";
    case ErrorCode::ResolutionTooLow: return "ResolutionTooLow";
    case ErrorCode::AmbiguousScan: return "AmbiguousScan";
    case ErrorCode::TailNotDecaying: return "TailNotDecaying";
    case ErrorCode::SpecParseError: return "SpecParseError";
    case ErrorCode::ValidationError: return "ValidationError";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

}  // namespace bicsep
