#pragma once

#include <string>
#include <string_view>

#include "stepsearch/core/types.hpp"

namespace stepsearch::backends {

// Template text and version, from assets/prompts at build time.
std::string_view reward_prompt_template();
std::string_view policy_prompt_template();
std::string_view prompt_templates_version();

// Replaces each {Name} in one pass; substituted text is not rescanned.
std::string substitute(std::string_view templ,
                       std::initializer_list<std::pair<std::string_view, std::string_view>> slots);

std::string render_rm_prompt(const Problem& problem, const CandidateSolution& solution);
std::string render_policy_prompt(const Problem& problem);

}  // namespace stepsearch::backends
