#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "stepsearch/core/types.hpp"
#include "stepsearch/textops/expr.hpp"

namespace stepsearch::textops {

struct Span {
  std::size_t begin = 0;
  std::size_t end = 0;  // exclusive

  bool operator==(const Span&) const = default;
};

struct Equation {
  std::string lhs_text;
  std::string rhs_text;
  Span span;

  bool operator==(const Equation&) const = default;
};

struct EquationCheck {
  Span source_span;
  std::string lhs_text;
  std::string rhs_text;
  std::optional<Number> recomputed_value;  // value of the left side
  std::optional<Number> claimed_value;     // value of the right side
  bool matches = false;
  std::string note;  // evaluation error, if any
};

inline constexpr double kRelativeTolerance = 1e-6;

// Every `<expr> = <expr>` in the text where both sides parse; each side is
// the longest parse bounded by neighbouring '=' signs and word boundaries.
// Results are in left-to-right order.
std::vector<Equation> extract_equations(std::string_view body);

// Exact comparison when both are rational, relative error otherwise.
bool numbers_match(const Number& recomputed, const Number& claimed);

std::vector<EquationCheck> verify_step(const Step& step);

// True when any check in the step fails.
bool has_mismatch(const Step& step);

}  // namespace stepsearch::textops
