#include "stepsearch/backends/prompts.hpp"

#include "prompt_assets.hpp"

namespace stepsearch::backends {

std::string_view reward_prompt_template() { return assets::kRewardPrompt; }
std::string_view policy_prompt_template() { return assets::kPolicyPrompt; }
std::string_view prompt_templates_version() { return assets::kPromptVersion; }

std::string substitute(
    std::string_view templ,
    std::initializer_list<std::pair<std::string_view, std::string_view>> slots) {
  std::string out;
  out.reserve(templ.size());
  std::size_t i = 0;
  while (i < templ.size()) {
    bool replaced = false;
    if (templ[i] == '{') {
      for (const auto& [name, value] : slots) {
        if (templ.substr(i + 1, name.size()) == name &&
            templ.substr(i + 1 + name.size(), 1) == "}") {
          out.append(value);
          i += name.size() + 2;
          replaced = true;
          break;
        }
      }
    }
    if (!replaced) out.push_back(templ[i++]);
  }
  return out;
}

std::string render_rm_prompt(const Problem& problem, const CandidateSolution& solution) {
  return substitute(reward_prompt_template(), {{"Problem", problem.statement},
                                               {"Generated Solution", solution.raw_text}});
}

std::string render_policy_prompt(const Problem& problem) {
  return substitute(policy_prompt_template(), {{"Problem", problem.statement}});
}

}  // namespace stepsearch::backends
