#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace stepsearch {

enum class ErrorKind {
  MalformedFormat,
  UnbalancedBraces,
  ParseError,
  DivisionByZero,
  Overflow,
  DomainError,
  BackendUnavailable,
  FormatError,
  NonTerminating,
  MissingProbabilities,
  NoChildren,
  NoLeaves,
  DepthExceeded,
  UnknownProblem,
  ConfigError,
  IoError,
};

std::string_view to_string(ErrorKind kind);

// Single exception type for the library; callers dispatch on kind().
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace stepsearch
