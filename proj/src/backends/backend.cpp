#include "stepsearch/backends/backend.hpp"

#include <cmath>

#include "stepsearch/core/error.hpp"
#include "stepsearch/textops/format.hpp"

namespace stepsearch::backends {

std::string SolutionPrefix::text() const {
  return textops::format_prefix(rephrasing, steps);
}

bool SolutionPrefix::terminal() const { return textops::has_final_answer(text()); }

std::vector<Step> generate_steps(PolicyBackend& policy, const SolutionPrefix& prefix, int k) {
  if (k < 1) throw Error(ErrorKind::ConfigError, "generate_steps: k must be >= 1");
  if (prefix.terminal()) throw Error(ErrorKind::ConfigError, "generate_steps: prefix is terminal");
  auto steps = policy.propose_steps(prefix, k);
  if (static_cast<int>(steps.size()) != k) {
    throw Error(ErrorKind::FormatError, policy.name() + " returned " +
                                            std::to_string(steps.size()) + " steps, wanted " +
                                            std::to_string(k));
  }
  const int want_index = static_cast<int>(prefix.steps.size()) + 1;
  for (const auto& step : steps) {
    if (step.index != want_index) {
      throw Error(ErrorKind::FormatError, "step index " + std::to_string(step.index) +
                                              " where " + std::to_string(want_index) +
                                              " was expected");
    }
    std::optional<CandidateSolution> reparsed;
    try {
      reparsed = textops::parse_solution(textops::format_step(step));
    } catch (const Error&) {
    }
    if (!reparsed || reparsed->steps.size() != 1 || reparsed->steps.front() != step) {
      throw Error(ErrorKind::FormatError, "generated step does not survive reformatting");
    }
  }
  return steps;
}

CandidateSolution rollout(PolicyBackend& policy, const SolutionPrefix& prefix) {
  if (prefix.terminal()) throw Error(ErrorKind::ConfigError, "rollout: prefix is terminal");
  auto solution = policy.complete(prefix);
  if (solution.steps.size() < prefix.steps.size()) {
    throw Error(ErrorKind::FormatError, "rollout dropped prefix steps");
  }
  const auto generated = solution.steps.size() - prefix.steps.size();
  if (generated > static_cast<std::size_t>(kMaxRolloutSteps)) {
    throw Error(ErrorKind::NonTerminating,
                "rollout generated " + std::to_string(generated) + " steps");
  }
  if (!solution.final_answer) {
    throw Error(ErrorKind::FormatError, "rollout ended without a final answer");
  }
  solution.problem_id = prefix.problem.id;
  return solution;
}

std::pair<double, double> normalize_reward(double p_yes, double p_no) {
  // e^y / (e^y + e^n) written as a logistic of the difference.
  const double yes = 1.0 / (1.0 + std::exp(p_no - p_yes));
  return {yes, 1.0 - yes};
}

RewardScore score_solution(RewardBackend& reward, const Problem& problem,
                           const CandidateSolution& solution) {
  auto [p_yes, p_no] = reward.yes_no_probabilities(problem, solution);
  if (!(p_yes >= 0.0 && p_yes <= 1.0 && p_no >= 0.0 && p_no <= 1.0)) {
    throw Error(ErrorKind::MissingProbabilities,
                reward.name() + " returned probabilities outside [0,1]");
  }
  RewardScore score;
  score.p_yes = p_yes;
  score.p_no = p_no;
  std::tie(score.normalized_yes, score.normalized_no) = normalize_reward(p_yes, p_no);
  return score;
}

}  // namespace stepsearch::backends
