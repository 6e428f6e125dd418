#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace stepsearch {

// Canonical key for an answer string: all whitespace removed, one outer
// \boxed{...} wrapper stripped, and numeric literals (integers, decimals,
// a/b, \frac{a}{b}) rewritten as a reduced rational "p" or "p/q".
std::string canonical_answer(std::string_view answer);

// Exact comparison of canonical keys; numeric answers compare as rationals.
bool answers_match(std::string_view a, std::string_view b);

// Reduced rational rendering of a numeric-looking answer, if it is one.
std::optional<std::string> numeric_answer_key(std::string_view answer);

}  // namespace stepsearch
