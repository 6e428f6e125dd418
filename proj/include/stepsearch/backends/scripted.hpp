#pragma once

// Deterministic synthetic policy and reward backends. A ScriptedWorld is a
// complete tree of fixed branching and depth per problem; exactly one
// root-to-leaf path (chosen from the seed) ends in the correct answer.

#include <cstdint>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include "stepsearch/backends/backend.hpp"
#include "stepsearch/core/rng.hpp"

namespace stepsearch::backends {

struct WorldSpec {
  int branching = 3;
  int depth = 4;
  // Probability that a rollout from a prefix on the correct path stays on it.
  double rollout_success = 0.5;
  // Probability that a step off the correct path carries an arithmetic error.
  double step_noise = 0.0;
  // 0 gives every wrong leaf its own answer; m > 0 draws wrong answers from a
  // pool of m distractors, so wrong answers repeat across leaves.
  int distractor_answers = 0;
  std::uint64_t seed = 0;
};

// Branch choices along a path, each in [1, branching].
using WorldPath = std::vector<int>;

class ScriptedWorld {
 public:
  explicit ScriptedWorld(WorldSpec spec);

  const WorldSpec& spec() const { return spec_; }

  WorldPath correct_path(const Problem& problem) const;
  // Ground truth when present, otherwise derived from the seed.
  std::string correct_answer(const Problem& problem) const;
  std::string leaf_answer(const Problem& problem, std::span<const int> path) const;
  bool on_correct_path(const Problem& problem, std::span<const int> path) const;
  bool step_is_noisy(const Problem& problem, std::span<const int> path) const;

  // Step reached by following path; its index is path.size().
  Step step_at(const Problem& problem, std::span<const int> path) const;

  // Inverse of step_at over a sequence of steps. Throws Error(FormatError)
  // for steps this world did not produce.
  WorldPath decode_path(std::span<const Step> steps) const;

  // Problem with a derived ground truth, for building synthetic datasets.
  Problem make_problem(const std::string& id) const;

 private:
  std::uint64_t problem_key(const Problem& problem) const;

  WorldSpec spec_;
};

class ScriptedPolicy : public PolicyBackend {
 public:
  ScriptedPolicy(std::shared_ptr<const ScriptedWorld> world, std::uint64_t seed);

  PolicyCapabilities capabilities() const override;
  std::string name() const override { return "scripted"; }
  std::vector<Step> propose_steps(const SolutionPrefix& prefix, int k) override;
  CandidateSolution complete(const SolutionPrefix& prefix) override;
  std::unique_ptr<PolicyBackend> fork(std::uint64_t seed) const override;

  const ScriptedWorld& world() const { return *world_; }

 private:
  std::shared_ptr<const ScriptedWorld> world_;
  std::uint64_t seed_;
  std::mutex mutex_;
  Rng rng_;
};

// p_yes = 1 for a correct final answer, 0 otherwise. Partial solutions (no
// final answer) score 1 when a world is attached and they lie on the correct
// path, which makes it usable for direct step scoring.
class OracleReward : public RewardBackend {
 public:
  explicit OracleReward(std::shared_ptr<const ScriptedWorld> world = nullptr);

  RewardCapabilities capabilities() const override { return {true}; }
  std::string name() const override { return "oracle"; }
  std::pair<double, double> yes_no_probabilities(const Problem& problem,
                                                 const CandidateSolution& solution) override;

  bool is_correct(const Problem& problem, const CandidateSolution& solution) const;

 private:
  std::shared_ptr<const ScriptedWorld> world_;
};

// Oracle judgement flipped with probability flip_rate and jittered by up to
// ±jitter/2, both keyed on the solution text so repeated scoring agrees.
class NoisyReward : public RewardBackend {
 public:
  NoisyReward(std::shared_ptr<const ScriptedWorld> world, double flip_rate,
              double jitter, std::uint64_t seed);

  RewardCapabilities capabilities() const override { return {true}; }
  std::string name() const override { return "noisy"; }
  std::pair<double, double> yes_no_probabilities(const Problem& problem,
                                                 const CandidateSolution& solution) override;

 private:
  OracleReward oracle_;
  double flip_rate_;
  double jitter_;
  std::uint64_t seed_;
};

}  // namespace stepsearch::backends
