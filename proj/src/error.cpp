#include "cwlaser/error.hpp"

namespace cwl {

const char* error_kind_name(ErrorKind k) {
  switch (k) {
    case ErrorKind::NotNormalized: return "NotNormalized";
    case ErrorKind::PartsMismatch: return "PartsMismatch";
    case ErrorKind::Infeasible: return "Infeasible";
    case ErrorKind::DidNotConverge: return "DidNotConverge";
    case ErrorKind::ZeroMass: return "ZeroMass";
    case ErrorKind::WrongLevel: return "WrongLevel";
    case ErrorKind::InvalidComponent: return "InvalidComponent";
    case ErrorKind::MultipleZeros: return "MultipleZeros";
    case ErrorKind::InfeasibleSplit: return "InfeasibleSplit";
    case ErrorKind::OutOfRange: return "OutOfRange";
    case ErrorKind::MissingLowerValue: return "MissingLowerValue";
    case ErrorKind::SymmetryViolated: return "SymmetryViolated";
    case ErrorKind::ConstraintViolated: return "ConstraintViolated";
    case ErrorKind::MarginMismatch: return "MarginMismatch";
    case ErrorKind::ZeroComponent: return "ZeroComponent";
    case ErrorKind::NoFeasibleTau: return "NoFeasibleTau";
    case ErrorKind::SolverFailure: return "SolverFailure";
    case ErrorKind::TooLarge: return "TooLarge";
    case ErrorKind::UniverseMismatch: return "UniverseMismatch";
    case ErrorKind::EvenModulus: return "EvenModulus";
    case ErrorKind::NotAChild: return "NotAChild";
    case ErrorKind::PreconditionUnmet: return "PreconditionUnmet";
    case ErrorKind::ParameterMismatch: return "ParameterMismatch";
    case ErrorKind::NonIntegerCounts: return "NonIntegerCounts";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::ValidationError: return "ValidationError";
  }
  return "Unknown";
}

int exit_code_for(ErrorKind k) {
  switch (k) {
    case ErrorKind::ConstraintViolated:
    case ErrorKind::SymmetryViolated:
      return 2;
    case ErrorKind::DidNotConverge:
    case ErrorKind::SolverFailure:
    case ErrorKind::NoFeasibleTau:
      return 3;
    default:
      return 1;
  }
}

}  // namespace cwl
