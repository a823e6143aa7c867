#pragma once

#include <stdexcept>
#include <string>

namespace cwl {

enum class ErrorKind {
  NotNormalized,
  PartsMismatch,
  Infeasible,
  DidNotConverge,
  ZeroMass,
  WrongLevel,
  InvalidComponent,
  MultipleZeros,
  InfeasibleSplit,
  OutOfRange,
  MissingLowerValue,
  SymmetryViolated,
  ConstraintViolated,
  MarginMismatch,
  ZeroComponent,
  NoFeasibleTau,
  SolverFailure,
  TooLarge,
  UniverseMismatch,
  EvenModulus,
  NotAChild,
  PreconditionUnmet,
  ParameterMismatch,
  NonIntegerCounts,
  ParseError,
  ValidationError,
};

const char* error_kind_name(ErrorKind k);

// CLI exit code for an error kind: 1 validation, 2 constraint violated,
// 3 solver failure.
int exit_code_for(ErrorKind k);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(error_kind_name(kind)) + ": " + what),
        kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

// ConstraintViolated carries the slack log2(a_z / (p_hat * a_x)).
class ConstraintError : public Error {
 public:
  ConstraintError(const std::string& what, double log2_slack)
      : Error(ErrorKind::ConstraintViolated, what), log2_slack_(log2_slack) {}
  double log2_slack() const { return log2_slack_; }

 private:
  double log2_slack_;
};

}  // namespace cwl
