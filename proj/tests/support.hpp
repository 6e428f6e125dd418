#pragma once

// Shared fakes and generators for the test binaries.

#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "stepsearch/backends/backend.hpp"
#include "stepsearch/backends/scripted.hpp"
#include "stepsearch/core/rng.hpp"
#include "stepsearch/core/types.hpp"
#include "stepsearch/textops/format.hpp"

namespace testsupport {

using namespace stepsearch;

class FnPolicy : public backends::PolicyBackend {
 public:
  using Propose = std::function<std::vector<Step>(const backends::SolutionPrefix&, int)>;
  using Complete = std::function<CandidateSolution(const backends::SolutionPrefix&)>;

  FnPolicy(Propose propose, Complete complete)
      : propose_(std::move(propose)), complete_(std::move(complete)) {}

  backends::PolicyCapabilities capabilities() const override { return {}; }
  std::string name() const override { return "fn"; }
  std::vector<Step> propose_steps(const backends::SolutionPrefix& p, int k) override {
    return propose_(p, k);
  }
  CandidateSolution complete(const backends::SolutionPrefix& p) override { return complete_(p); }
  std::unique_ptr<backends::PolicyBackend> fork(std::uint64_t) const override {
    return std::make_unique<FnPolicy>(propose_, complete_);
  }

 private:
  Propose propose_;
  Complete complete_;
};

class FnReward : public backends::RewardBackend {
 public:
  using Score = std::function<std::pair<double, double>(const Problem&, const CandidateSolution&)>;
  explicit FnReward(Score score) : score_(std::move(score)) {}
  backends::RewardCapabilities capabilities() const override { return {}; }
  std::string name() const override { return "fn"; }
  std::pair<double, double> yes_no_probabilities(const Problem& p, const CandidateSolution& s) override {
    return score_(p, s);
  }

 private:
  Score score_;
};

inline Step make_step(int index, std::string title, std::string body) {
  return Step{index, std::move(title), std::move(body)};
}

// Completes any prefix with one step carrying the given answer.
inline CandidateSolution finish_with(const backends::SolutionPrefix& p, const std::string& answer) {
  CandidateSolution s;
  s.problem_id = p.problem.id;
  s.steps = p.steps;
  s.steps.push_back(make_step(static_cast<int>(p.steps.size()) + 1, "Conclude",
                              "So the result is \\boxed{" + answer + "}."));
  s.final_answer = answer;
  s.raw_text = textops::format_solution(s);
  return s;
}

// Valid random tree: values in [0,1], random visits, terminal only on leaves.
inline SearchTree random_tree(Rng& rng, int nodes) {
  auto tree = SearchTree::with_root("rand");
  for (int i = 1; i < nodes; ++i) {
    std::vector<NodeId> open;
    for (const auto& n : tree.nodes) {
      if (!n.terminal) open.push_back(n.node_id);
    }
    const NodeId parent = open[rng.below(open.size())];
    const NodeId id = tree.add_child(parent, make_step(tree.node(parent).depth + 1, "t", "b"));
    auto& n = tree.node(id);
    n.value = rng.uniform();
    n.visits = static_cast<std::int64_t>(rng.below(20));
    n.terminal = rng.bernoulli(0.2);
  }
  tree.node(0).value = rng.uniform();
  return tree;
}

inline std::shared_ptr<const backends::ScriptedWorld> make_world(backends::WorldSpec spec) {
  return std::make_shared<backends::ScriptedWorld>(spec);
}

inline std::vector<Problem> make_problems(const backends::ScriptedWorld& world, int count,
                                          const std::string& prefix = "p") {
  std::vector<Problem> out;
  for (int i = 0; i < count; ++i) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d", i);
    out.push_back(world.make_problem(prefix + buf));
  }
  return out;
}

// Every root-to-leaf path of the world with its leaf answer.
inline std::vector<std::pair<backends::WorldPath, std::string>> enumerate_leaves(
    const backends::ScriptedWorld& world, const Problem& problem) {
  const int b = world.spec().branching;
  const int d = world.spec().depth;
  std::vector<std::pair<backends::WorldPath, std::string>> out;
  backends::WorldPath path(static_cast<std::size_t>(d), 1);
  while (true) {
    out.emplace_back(path, world.leaf_answer(problem, path));
    int i = d - 1;
    while (i >= 0 && path[static_cast<std::size_t>(i)] == b) path[static_cast<std::size_t>(i--)] = 1;
    if (i < 0) break;
    ++path[static_cast<std::size_t>(i)];
  }
  return out;
}

}  // namespace testsupport
