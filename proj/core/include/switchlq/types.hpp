#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <vector>

namespace switchlq {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

/// Regime-indexed family of objects (one entry per regime of the switching chain).
template <class T>
using PerRegime = std::vector<T>;

/// Failure kinds surfaced by validation and the solvers.
enum class ErrorCode {
  NonSquare,
  RowSumViolation,
  NegativeRate,
  DimensionMismatch,
  NotSymmetric,
  NotPositiveDefinite,
  UnsupportedInput,
  BadArgument,
  EigenFailure,
  SingularOperator,
  GainSingular,
  StepRejected,
  NotStabilizable,
  NotStabilizing,
  Stalled,
  GridTooCoarse,
  BlowUp,
  Infeasible,
  Verification,
};

const char* to_string(ErrorCode code);

/// Base of the exception hierarchy. Subclasses group failures by the process
/// exit code the CLI maps them to: ConfigError -> 1, SolverError -> 2,
/// VerificationError -> 3.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Malformed or inconsistent input data (bad generator, dimension mismatch, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Well-posed input on which a solver cannot or should not produce a result.
class SolverError : public Error {
 public:
  using Error::Error;
};

/// A statistical or analytic verification gate failed.
class VerificationError : public Error {
 public:
  explicit VerificationError(const std::string& message)
      : Error(ErrorCode::Verification, message) {}
};

}  // namespace switchlq
