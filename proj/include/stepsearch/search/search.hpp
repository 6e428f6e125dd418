#pragma once

// Reward-guided tree search over reasoning steps. Each search step selects a
// leaf (UCB descent for MCTS, a global value threshold for MCTS_G), expands
// it with k policy steps, values every new child by rollouts scored by the
// reward model, and propagates the child values to the root.

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "stepsearch/backends/backend.hpp"
#include "stepsearch/core/trace.hpp"
#include "stepsearch/core/types.hpp"

namespace stepsearch::search {

struct SearchOutcome {
  SearchTree tree;
  std::optional<std::string> answer;
  AnswerSource answer_source = AnswerSource::BestTerminal;
  int steps_used = 0;
  double wall_time_ms = 0.0;
  // Score of the chosen trajectory under the rule that picked it.
  std::optional<double> answer_score;
};

nlohmann::json to_json(const SearchOutcome& outcome);

struct SearchContext {
  const Problem& problem;
  const SearchConfig& config;
  backends::PolicyBackend& policy;
  backends::RewardBackend& reward;
  TraceLog* trace = nullptr;

  void emit(TraceEventKind kind, nlohmann::json payload) const;
};

backends::SolutionPrefix prefix_of(const SearchTree& tree, NodeId node, const Problem& problem);

double ucb_value(const SearchTree& tree, NodeId parent, NodeId child, double c);

// argmax over children of V(child) + c * sqrt(ln N(node) / (1 + N(child))),
// ties to the smallest node id. Throws Error(NoChildren).
NodeId ucb_select(const SearchTree& tree, NodeId node, double c);

struct LeafSelection {
  std::vector<NodeId> leaves;  // ascending node id
  LeafStats stats;
};

// Over all non-terminal leaves: threshold p = mean + lambda * stddev
// (population), selecting every leaf with V > p, or the single max-V leaf
// when none exceeds it. Throws Error(NoLeaves).
LeafSelection global_leaf_select(const SearchTree& tree, double lambda);
LeafSelection global_leaf_select(const SearchTree& tree, std::span<const NodeId> leaves,
                                 double lambda);

// Adds up to k children from the policy; byte-identical steps collapse into
// one child. Throws Error(DepthExceeded) at max_depth.
std::vector<NodeId> expand(SearchTree& tree, NodeId node, int k, const SearchContext& ctx);

// Sets and returns V(child): the mean blended reward of n rollouts, or the
// blended reward of the child's own trajectory when it is terminal. Rollouts
// are appended to tree.rollout_history. Visit counts are left untouched.
double simulate(SearchTree& tree, NodeId child, int n, double alpha, const SearchContext& ctx);

// Updates node and each ancestor:
//   V <- (N * V + sum(values)) / (N + k),  N <- N + k.
void backpropagate(SearchTree& tree, NodeId node, std::span<const double> child_values);

// Expands every node at depth < layers breadth first, with simulation and
// backpropagation for each expansion.
void pre_expand(SearchTree& tree, int layers, int k, const SearchContext& ctx);

// Fraction of rollout_history whose canonical answer equals answer's.
double self_consistency(const SearchTree& tree, const std::string& answer);

double blend_reward(double reward, double sc, double alpha);

// Plurality canonical answer over rollout_history, ties to the smallest
// canonical string.
std::optional<std::string> majority_answer(const SearchTree& tree);

struct ScoredTrajectory {
  std::size_t history_index = 0;
  std::string answer;
  double score = 0.0;
};

// Highest (1 - alpha) * R + alpha * SC over rollout_history, with SC taken over
// the full history and the tool penalty applied to trajectories containing a
// mismatching step. Ties go to the earliest trajectory.
std::optional<ScoredTrajectory> best_terminal(const SearchTree& tree, const SearchConfig& config);

SearchOutcome run_search(const Problem& problem, const SearchConfig& config,
                         backends::PolicyBackend& policy, backends::RewardBackend& reward,
                         TraceLog* trace = nullptr);

// B live beams each propose candidates (k * B in total), candidates are
// scored by rollouts or directly by the reward model, and the top B survive.
// Ends when every beam is terminal, nothing can be expanded, or the budget
// runs out.
SearchOutcome beam_search(const Problem& problem, const SearchConfig& config,
                          backends::PolicyBackend& policy, backends::RewardBackend& reward,
                          TraceLog* trace = nullptr);

}  // namespace stepsearch::search
