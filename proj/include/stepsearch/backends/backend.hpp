#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "stepsearch/core/types.hpp"

namespace stepsearch::backends {

// Rollouts that generate more steps than this fail with NonTerminating.
inline constexpr int kMaxRolloutSteps = 40;

// Problem plus the steps generated so far.
struct SolutionPrefix {
  Problem problem;
  std::string rephrasing;
  std::vector<Step> steps;

  std::string text() const;
  bool terminal() const;
};

struct PolicyCapabilities {
  bool supports_step_generation = true;
  bool supports_rollout = true;
  int max_batch = 1;
};

struct RewardCapabilities {
  bool returns_token_probabilities = false;
};

class PolicyBackend {
 public:
  virtual ~PolicyBackend() = default;

  virtual PolicyCapabilities capabilities() const = 0;
  virtual std::string name() const = 0;

  // Backend hooks; callers go through the checked free functions below.
  virtual std::vector<Step> propose_steps(const SolutionPrefix& prefix, int k) = 0;
  virtual CandidateSolution complete(const SolutionPrefix& prefix) = 0;

  // Independent sampling stream keyed by seed. Stateless backends may return
  // a handle to shared state.
  virtual std::unique_ptr<PolicyBackend> fork(std::uint64_t seed) const = 0;
};

class RewardBackend {
 public:
  virtual ~RewardBackend() = default;

  virtual RewardCapabilities capabilities() const = 0;
  virtual std::string name() const = 0;

  // Probabilities of the "Yes" and "No" assessment tokens, each in [0,1].
  virtual std::pair<double, double> yes_no_probabilities(
      const Problem& problem, const CandidateSolution& solution) = 0;
};

// Exactly k steps, each with index prefix.steps.size() + 1. Throws
// Error(FormatError) if the backend returns the wrong count, and
// Error(ConfigError) when k < 1 or the prefix is already terminal.
std::vector<Step> generate_steps(PolicyBackend& policy, const SolutionPrefix& prefix, int k);

// Complete solution extending prefix with a final answer. Throws
// Error(NonTerminating) beyond kMaxRolloutSteps new steps.
CandidateSolution rollout(PolicyBackend& policy, const SolutionPrefix& prefix);

// Softmax over the raw Yes/No probabilities.
std::pair<double, double> normalize_reward(double p_yes, double p_no);

RewardScore score_solution(RewardBackend& reward, const Problem& problem,
                           const CandidateSolution& solution);

}  // namespace stepsearch::backends
