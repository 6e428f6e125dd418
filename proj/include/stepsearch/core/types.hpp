#pragma once

// Domain types shared by every module. Everything here is a plain value
// type; SearchTree is the only type mutated after construction, and only by
// the search engine.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace stepsearch {

using NodeId = std::int64_t;

struct Problem {
  std::string id;
  std::string statement;
  std::optional<std::string> ground_truth;

  bool operator==(const Problem&) const = default;
};

struct Step {
  int index = 1;
  std::string title;
  std::string body;

  bool operator==(const Step&) const = default;
};

enum class Label { Correct, Incorrect, Unlabeled };

struct CandidateSolution {
  // Not part of the generated text; used for deterministic tie-breaking.
  std::string id;
  std::string problem_id;
  std::string rephrasing;
  std::vector<Step> steps;
  std::optional<std::string> final_answer;
  std::string raw_text;
  Label label = Label::Unlabeled;
  std::optional<double> rm_score;

  bool operator==(const CandidateSolution&) const = default;
};

struct TreeNode {
  NodeId node_id = 0;
  std::optional<NodeId> parent_id;  // nullopt marks the root
  std::vector<NodeId> children;
  std::optional<Step> step;  // nullopt is the root sentinel
  double value = 0.0;
  std::int64_t visits = 0;
  bool terminal = false;
  int depth = 0;
  // Set when calculator verification found a mismatching equation in step.
  bool tool_mismatch = false;

  bool operator==(const TreeNode&) const = default;
};

struct RolloutNote {
  NodeId origin = 0;  // node the rollout was simulated from
  bool tool_clean = true;

  bool operator==(const RolloutNote&) const = default;
};

struct SearchTree {
  std::vector<TreeNode> nodes;  // nodes[i].node_id == i
  NodeId root_id = 0;
  std::string problem_id;
  std::vector<CandidateSolution> rollout_history;
  std::vector<RolloutNote> rollout_notes;  // parallel to rollout_history

  static SearchTree with_root(std::string problem_id);

  TreeNode& node(NodeId id) { return nodes.at(static_cast<std::size_t>(id)); }
  const TreeNode& node(NodeId id) const {
    return nodes.at(static_cast<std::size_t>(id));
  }
  const TreeNode& root() const { return node(root_id); }
  NodeId add_child(NodeId parent, Step step);
  std::vector<NodeId> leaves() const;
  std::vector<Step> path_steps(NodeId id) const;

  bool operator==(const SearchTree&) const = default;
};

struct LeafStats {
  double mean = 0.0;
  double stddev = 0.0;
  double threshold = 0.0;
  std::int64_t leaf_count = 0;

  bool operator==(const LeafStats&) const = default;
};

enum class Algorithm { MCTS, MCTS_G, Beam };
enum class AnswerSource { BestTerminal, MajorityRollout };
enum class ToolPenaltyMode { Hard, Soft };
enum class BeamScoring { Rollout, Direct };

struct SearchConfig {
  Algorithm algorithm = Algorithm::MCTS;
  double exploration_c = 1.0;
  double lambda = 1.0;
  int children_per_expansion = 3;
  int rollouts_per_simulation = 5;
  double sc_alpha = 0.5;
  int beam_width = 3;
  int pre_expansion_layers = 2;
  int step_budget = 30;
  int max_depth = 40;
  bool tool_verification = false;
  std::uint64_t rng_seed = 0;

  ToolPenaltyMode tool_penalty = ToolPenaltyMode::Hard;
  // When set, a node whose step fails verification is never expanded.
  bool tool_blocks_expansion = false;
  AnswerSource answer_source = AnswerSource::BestTerminal;
  BeamScoring beam_scoring = BeamScoring::Rollout;
  // 0 disables the wall-clock limit.
  std::int64_t time_limit_ms = 0;
  // Rollouts of one simulation run on this many threads.
  int rollout_threads = 1;

  double tool_penalty_factor() const {
    return tool_penalty == ToolPenaltyMode::Hard ? 0.0 : 0.5;
  }

  bool operator==(const SearchConfig&) const = default;
};

struct RewardScore {
  double p_yes = 0.0;
  double p_no = 0.0;
  double normalized_yes = 0.5;
  double normalized_no = 0.5;

  bool operator==(const RewardScore&) const = default;
};

enum class DatasetKind { Original, Cleaned, ActiveLearning };

struct LabeledEntry {
  Problem problem;
  CandidateSolution solution;

  bool operator==(const LabeledEntry&) const = default;
};

struct LabeledDataset {
  DatasetKind kind = DatasetKind::Original;
  std::vector<LabeledEntry> entries;

  bool operator==(const LabeledDataset&) const = default;
};

struct PreferencePair {
  Problem problem;
  CandidateSolution positive;
  CandidateSolution negative;

  bool operator==(const PreferencePair&) const = default;
};

enum class TraceEventKind {
  Selected,
  Expanded,
  Simulated,
  Backpropagated,
  PreExpanded,
  ToolVerified,
  Finished,
};

struct TraceEvent {
  // Logical clock: position of the event in its tree's stream. Wall-clock
  // time lives in run manifests so trace files stay replayable.
  std::uint64_t timestamp = 0;
  std::string tree_id;
  TraceEventKind event = TraceEventKind::Selected;
  nlohmann::json payload = nlohmann::json::object();

  bool operator==(const TraceEvent&) const = default;
};

bool is_valid(const RewardScore& score);
std::vector<std::string> validate(const CandidateSolution& solution);
std::vector<std::string> validate(const SearchConfig& config);
std::vector<std::string> validate(const LeafStats& stats, double lambda);
std::vector<std::string> validate(const PreferencePair& pair);
std::vector<std::string> validate(const LabeledDataset& dataset);
std::vector<std::string> validate_problems(const std::vector<Problem>& problems);

// Empty iff every SearchTree/TreeNode invariant holds. Each entry names the
// offending node and the broken invariant.
std::vector<std::string> validate_tree(const SearchTree& tree);

std::string_view to_string(Label label);
std::string_view to_string(Algorithm algorithm);
std::string_view to_string(AnswerSource source);
std::string_view to_string(DatasetKind kind);
std::string_view to_string(TraceEventKind kind);

}  // namespace stepsearch
