#include "gnsq/error.hpp"

namespace gnsq {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::NonFiniteResidual: return "NonFiniteResidual";
    case ErrorCode::NonFiniteGradient: return "NonFiniteGradient";
    case ErrorCode::InvalidBatch: return "InvalidBatch";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::SingularSolve: return "SingularSolve";
    case ErrorCode::BracketFailure: return "BracketFailure";
    case ErrorCode::DomainError: return "DomainError";
    case ErrorCode::RootFindFailure: return "RootFindFailure";
    case ErrorCode::FactorizationError: return "FactorizationError";
    case ErrorCode::ReconstructError: return "ReconstructError";
    case ErrorCode::CapExceeded: return "CapExceeded";
    case ErrorCode::IterationLimit: return "IterationLimit";
    case ErrorCode::StallLimit: return "StallLimit";
    case ErrorCode::MissingEstimate: return "MissingEstimate";
    case ErrorCode::ZeroGradient: return "ZeroGradient";
    case ErrorCode::ZeroBatchResidual: return "ZeroBatchResidual";
    case ErrorCode::UnknownSpec: return "UnknownSpec";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::MismatchedProblem: return "MismatchedProblem";
    case ErrorCode::PLViolated: return "PLViolated";
  }
  return "Unknown";
}

}  // namespace gnsq
