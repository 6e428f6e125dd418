#include "stepsearch/core/types.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <unordered_map>

namespace stepsearch {

SearchTree SearchTree::with_root(std::string problem_id) {
  SearchTree tree;
  tree.problem_id = std::move(problem_id);
  tree.nodes.push_back(TreeNode{});
  tree.root_id = 0;
  return tree;
}

NodeId SearchTree::add_child(NodeId parent, Step step) {
  const auto id = static_cast<NodeId>(nodes.size());
  TreeNode child;
  child.node_id = id;
  child.parent_id = parent;
  child.depth = node(parent).depth + 1;
  child.step = std::move(step);
  nodes.push_back(std::move(child));
  node(parent).children.push_back(id);
  return id;
}

std::vector<NodeId> SearchTree::leaves() const {
  std::vector<NodeId> out;
  for (const auto& n : nodes) {
    if (n.children.empty()) out.push_back(n.node_id);
  }
  return out;
}

std::vector<Step> SearchTree::path_steps(NodeId id) const {
  std::vector<Step> steps;
  std::optional<NodeId> cur = id;
  while (cur) {
    const auto& n = node(*cur);
    if (n.step) steps.push_back(*n.step);
    cur = n.parent_id;
  }
  std::reverse(steps.begin(), steps.end());
  return steps;
}

bool is_valid(const RewardScore& s) {
  auto in01 = [](double x) { return x >= 0.0 && x <= 1.0; };
  return in01(s.p_yes) && in01(s.p_no) && s.normalized_yes > 0.0 &&
         s.normalized_yes < 1.0 && s.normalized_no > 0.0 &&
         s.normalized_no < 1.0 &&
         std::abs(s.normalized_yes + s.normalized_no - 1.0) <= 1e-12;
}

std::vector<std::string> validate(const CandidateSolution& s) {
  std::vector<std::string> out;
  if (s.label != Label::Unlabeled && !s.final_answer) {
    out.push_back("solution " + s.id + ": labeled without a final answer");
  }
  if (s.rm_score && (*s.rm_score < 0.0 || *s.rm_score > 1.0)) {
    out.push_back("solution " + s.id + ": rm_score outside [0,1]");
  }
  for (std::size_t i = 0; i < s.steps.size(); ++i) {
    if (s.steps[i].index < 1) {
      out.push_back("solution " + s.id + ": step index below 1");
    }
    if (i > 0 && s.steps[i].index != s.steps[i - 1].index + 1) {
      out.push_back("solution " + s.id + ": step indices not consecutive at " +
                    std::to_string(s.steps[i].index));
    }
  }
  return out;
}

std::vector<std::string> validate(const SearchConfig& c) {
  std::vector<std::string> out;
  if (!(c.exploration_c >= 0.0)) out.push_back("exploration_c must be >= 0");
  if (!std::isfinite(c.lambda)) out.push_back("lambda must be finite");
  if (c.children_per_expansion < 1) {
    out.push_back("children_per_expansion must be >= 1");
  }
  if (c.rollouts_per_simulation < 1) {
    out.push_back("rollouts_per_simulation must be >= 1");
  }
  if (!(c.sc_alpha >= 0.0 && c.sc_alpha <= 1.0)) {
    out.push_back("sc_alpha must lie in [0,1]");
  }
  if (c.beam_width < 1) out.push_back("beam_width must be >= 1");
  if (c.pre_expansion_layers < 0) {
    out.push_back("pre_expansion_layers must be >= 0");
  }
  if (c.step_budget < 0) out.push_back("step_budget must be >= 0");
  if (c.max_depth < 1) out.push_back("max_depth must be >= 1");
  if (c.time_limit_ms < 0) out.push_back("time_limit_ms must be >= 0");
  if (c.rollout_threads < 1) out.push_back("rollout_threads must be >= 1");
  return out;
}

std::vector<std::string> validate(const LeafStats& s, double lambda) {
  std::vector<std::string> out;
  if (s.stddev < 0.0) out.push_back("leaf stats: negative stddev");
  if (std::abs(s.threshold - (s.mean + lambda * s.stddev)) > 1e-12) {
    out.push_back("leaf stats: threshold != mean + lambda * stddev");
  }
  if (s.leaf_count < 1) out.push_back("leaf stats: leaf_count < 1");
  return out;
}

std::vector<std::string> validate(const PreferencePair& p) {
  std::vector<std::string> out;
  if (p.positive.label != Label::Correct) {
    out.push_back("pair " + p.problem.id + ": positive not labeled correct");
  }
  if (p.negative.label != Label::Incorrect) {
    out.push_back("pair " + p.problem.id + ": negative not labeled incorrect");
  }
  if (p.positive.problem_id != p.problem.id ||
      p.negative.problem_id != p.problem.id) {
    out.push_back("pair " + p.problem.id + ": solution for another problem");
  }
  return out;
}

std::vector<std::string> validate(const LabeledDataset& d) {
  std::vector<std::string> out;
  for (const auto& e : d.entries) {
    if (e.solution.label == Label::Unlabeled) {
      out.push_back("dataset entry " + e.solution.id + ": unlabeled");
    }
    if (e.solution.problem_id != e.problem.id) {
      out.push_back("dataset entry " + e.solution.id + ": problem id mismatch");
    }
    for (auto& v : validate(e.solution)) out.push_back(std::move(v));
  }
  return out;
}

std::vector<std::string> validate_problems(const std::vector<Problem>& problems) {
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (const auto& p : problems) {
    if (p.id.empty()) out.push_back("problem with empty id");
    if (p.statement.empty()) out.push_back("problem " + p.id + ": empty statement");
    if (!seen.insert(p.id).second) out.push_back("problem " + p.id + ": duplicate id");
  }
  return out;
}

std::vector<std::string> validate_tree(const SearchTree& tree) {
  std::vector<std::string> out;
  auto label = [](NodeId id) { return "node " + std::to_string(id) + ": "; };
  const auto count = static_cast<NodeId>(tree.nodes.size());
  auto known = [&](NodeId id) { return id >= 0 && id < count; };

  if (!known(tree.root_id)) {
    out.push_back("tree: root_id " + std::to_string(tree.root_id) +
                  " does not exist");
    return out;
  }

  int roots = 0;
  for (NodeId i = 0; i < count; ++i) {
    const auto& n = tree.nodes[static_cast<std::size_t>(i)];
    if (n.node_id != i) out.push_back(label(i) + "node_id does not match its slot");
    if (!n.parent_id) {
      ++roots;
      if (i != tree.root_id) out.push_back(label(i) + "parentless node is not the root");
      if (n.depth != 0) out.push_back(label(i) + "root depth is not 0");
      if (n.step) out.push_back(label(i) + "root carries a step");
    } else {
      if (i == tree.root_id) out.push_back(label(i) + "root has a parent");
      if (!known(*n.parent_id)) {
        out.push_back(label(i) + "parent " + std::to_string(*n.parent_id) +
                      " does not exist");
      } else {
        const auto& p = tree.nodes[static_cast<std::size_t>(*n.parent_id)];
        if (std::count(p.children.begin(), p.children.end(), i) != 1) {
          out.push_back(label(i) + "not listed exactly once by parent " +
                        std::to_string(*n.parent_id));
        }
        if (n.depth != p.depth + 1) out.push_back(label(i) + "depth != parent depth + 1");
      }
      if (!n.step) out.push_back(label(i) + "non-root node without a step");
    }
    if (n.visits < 0) out.push_back(label(i) + "negative visit count");
    if (n.terminal && !n.children.empty()) out.push_back(label(i) + "terminal node has children");
    if (!(n.value >= 0.0 && n.value <= 1.0)) out.push_back(label(i) + "value outside [0,1]");
    for (NodeId c : n.children) {
      if (!known(c)) {
        out.push_back(label(i) + "child " + std::to_string(c) + " does not exist");
      } else if (tree.nodes[static_cast<std::size_t>(c)].parent_id != i) {
        out.push_back(label(c) + "listed as child of " + std::to_string(i) +
                      " but names a different parent");
      }
    }
  }
  if (roots != 1) out.push_back("tree: expected exactly one root, found " + std::to_string(roots));

  // Reachability from the root along child links.
  std::vector<char> seen(tree.nodes.size(), 0);
  std::vector<NodeId> stack{tree.root_id};
  while (!stack.empty()) {
    NodeId id = stack.back();
    stack.pop_back();
    if (seen[static_cast<std::size_t>(id)]) {
      out.push_back(label(id) + "reached twice (cycle or shared child)");
      continue;
    }
    seen[static_cast<std::size_t>(id)] = 1;
    for (NodeId c : tree.nodes[static_cast<std::size_t>(id)].children) {
      if (known(c)) stack.push_back(c);
    }
  }
  for (NodeId i = 0; i < count; ++i) {
    if (!seen[static_cast<std::size_t>(i)]) out.push_back(label(i) + "unreachable from root");
  }

  if (tree.rollout_notes.size() != tree.rollout_history.size()) {
    out.push_back("tree: rollout_notes and rollout_history lengths differ");
  }
  return out;
}

std::string_view to_string(Label label) {
  switch (label) {
    case Label::Correct: return "correct";
    case Label::Incorrect: return "incorrect";
    case Label::Unlabeled: return "unlabeled";
  }
  return "unlabeled";
}

std::string_view to_string(Algorithm a) {
  switch (a) {
    case Algorithm::MCTS: return "mcts";
    case Algorithm::MCTS_G: return "mcts_g";
    case Algorithm::Beam: return "beam";
  }
  return "mcts";
}

std::string_view to_string(AnswerSource s) {
  return s == AnswerSource::BestTerminal ? "best_terminal" : "majority_rollout";
}

std::string_view to_string(DatasetKind k) {
  switch (k) {
    case DatasetKind::Original: return "original";
    case DatasetKind::Cleaned: return "cleaned";
    case DatasetKind::ActiveLearning: return "active_learning";
  }
  return "original";
}

std::string_view to_string(TraceEventKind k) {
  switch (k) {
    case TraceEventKind::Selected: return "selected";
    case TraceEventKind::Expanded: return "expanded";
    case TraceEventKind::Simulated: return "simulated";
    case TraceEventKind::Backpropagated: return "backpropagated";
    case TraceEventKind::PreExpanded: return "pre_expanded";
    case TraceEventKind::ToolVerified: return "tool_verified";
    case TraceEventKind::Finished: return "finished";
  }
  return "selected";
}

}  // namespace stepsearch
