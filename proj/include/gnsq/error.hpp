#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

namespace gnsq {

enum class ErrorCode {
  NonFiniteResidual,
  NonFiniteGradient,
  InvalidBatch,
  DimensionMismatch,
  SingularSolve,
  BracketFailure,
  DomainError,
  RootFindFailure,
  FactorizationError,
  ReconstructError,
  CapExceeded,
  IterationLimit,
  StallLimit,
  MissingEstimate,
  ZeroGradient,
  ZeroBatchResidual,
  UnknownSpec,
  ConfigError,
  MismatchedProblem,
  PLViolated,
};

const char* error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what,
        std::optional<std::size_t> index = std::nullopt)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + what),
        code_(code),
        index_(index) {}

  ErrorCode code() const { return code_; }
  // 1-based component index, when the failure is tied to one.
  std::optional<std::size_t> index() const { return index_; }

 private:
  ErrorCode code_;
  std::optional<std::size_t> index_;
};

}  // namespace gnsq
