#include "stepsearch/core/error.hpp"

namespace stepsearch {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::MalformedFormat: return "malformed_format";
    case ErrorKind::UnbalancedBraces: return "unbalanced_braces";
    case ErrorKind::ParseError: return "parse_error";
    case ErrorKind::DivisionByZero: return "division_by_zero";
    case ErrorKind::Overflow: return "overflow";
    case ErrorKind::DomainError: return "domain_error";
    case ErrorKind::BackendUnavailable: return "backend_unavailable";
    case ErrorKind::FormatError: return "format_error";
    case ErrorKind::NonTerminating: return "non_terminating";
    case ErrorKind::MissingProbabilities: return "missing_probabilities";
    case ErrorKind::NoChildren: return "no_children";
    case ErrorKind::NoLeaves: return "no_leaves";
    case ErrorKind::DepthExceeded: return "depth_exceeded";
    case ErrorKind::UnknownProblem: return "unknown_problem";
    case ErrorKind::ConfigError: return "config_error";
    case ErrorKind::IoError: return "io_error";
  }
  return "unknown";
}

}  // namespace stepsearch
