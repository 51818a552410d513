#include "molbuild/error.hpp"

namespace molbuild {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InfeasibleAction: return "InfeasibleAction";
    case ErrorKind::BudgetExceeded: return "BudgetExceeded";
    case ErrorKind::SyntaxError: return "SyntaxError";
    case ErrorKind::UnsupportedAtom: return "UnsupportedAtom";
    case ErrorKind::KekulizationFailure: return "KekulizationFailure";
    case ErrorKind::ValenceViolation: return "ValenceViolation";
    case ErrorKind::DisconnectedMolecule: return "DisconnectedMolecule";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::EmptyFeasibleSet: return "EmptyFeasibleSet";
    case ErrorKind::CorruptCheckpoint: return "CorruptCheckpoint";
    case ErrorKind::AlphabetMismatch: return "AlphabetMismatch";
    case ErrorKind::TargetMasked: return "TargetMasked";
    case ErrorKind::NonFiniteGradient: return "NonFiniteGradient";
    case ErrorKind::EmptyCorpus: return "EmptyCorpus";
    case ErrorKind::NonPositiveGamma: return "NonPositiveGamma";
    case ErrorKind::OracleUnreachable: return "OracleUnreachable";
    case ErrorKind::OracleTimeout: return "OracleTimeout";
    case ErrorKind::ProtocolError: return "ProtocolError";
    case ErrorKind::ObjectiveFailure: return "ObjectiveFailure";
    case ErrorKind::ConfigError: return "ConfigError";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

}  // namespace molbuild
