#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "stepsearch/core/types.hpp"

namespace stepsearch::textops {

inline constexpr std::string_view kFormulationHeader = "**Problem Formulation**";
inline constexpr std::string_view kFinalAnswerHeader = "**Final Answer**";

// Splits generated text on the formulation, step, and final-answer headers.
// Step headers are `**Step i: title**` or `**Step i. title**` on their own
// line; indices are taken as written. final_answer is the content of the
// last \boxed{} in the text. Throws Error(MalformedFormat) when the text has
// neither a step header nor a final-answer block, or an unbalanced \boxed{.
CandidateSolution parse_solution(std::string_view raw_text);

// Canonical rendering: sections joined by one blank line, no trailing
// newline. parse_solution(format_solution(s)) reproduces s's rephrasing,
// steps, and final answer.
std::string format_solution(const CandidateSolution& solution);

std::string format_step(const Step& step);

// Formulation (if any) plus steps, without a final-answer block.
std::string format_prefix(std::string_view rephrasing, std::span<const Step> steps);

// Content of the last \boxed{...}, with nested braces. Throws
// Error(UnbalancedBraces) if that opener never closes.
std::optional<std::string> extract_boxed(std::string_view text);

// True when extract_boxed finds an answer; unbalanced braces count as no
// answer.
bool has_final_answer(std::string_view text);

// Rejects invalid UTF-8 and control characters other than tab/newline/CR.
bool is_clean_text(std::string_view text);

}  // namespace stepsearch::textops
