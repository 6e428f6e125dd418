#include "stepsearch/search/search.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <future>
#include <limits>
#include <map>
#include <set>

#include "stepsearch/core/answer.hpp"
#include "stepsearch/core/error.hpp"
#include "stepsearch/core/json_io.hpp"
#include "stepsearch/core/rng.hpp"
#include "stepsearch/textops/format.hpp"
#include "stepsearch/textops/verify.hpp"

namespace stepsearch::search {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

void SearchContext::emit(TraceEventKind kind, json payload) const {
  if (trace) trace->emit(problem.id, kind, std::move(payload));
}

json to_json(const SearchOutcome& o) {
  json tree;
  stepsearch::to_json(tree, o.tree);
  return json{{"tree", tree},
              {"answer", o.answer ? json(*o.answer) : json(nullptr)},
              {"answer_source", to_string(o.answer_source)},
              {"steps_used", o.steps_used},
              {"wall_time_ms", o.wall_time_ms},
              {"answer_score", o.answer_score ? json(*o.answer_score) : json(nullptr)}};
}

backends::SolutionPrefix prefix_of(const SearchTree& tree, NodeId node, const Problem& problem) {
  backends::SolutionPrefix prefix;
  prefix.problem = problem;
  prefix.steps = tree.path_steps(node);
  return prefix;
}

double ucb_value(const SearchTree& tree, NodeId parent, NodeId child, double c) {
  const auto& p = tree.node(parent);
  const auto& ch = tree.node(child);
  const double parent_visits = static_cast<double>(std::max<std::int64_t>(p.visits, 1));
  return ch.value + c * std::sqrt(std::log(parent_visits) / (1.0 + static_cast<double>(ch.visits)));
}

namespace {

NodeId argmax_ucb(const SearchTree& tree, NodeId node, double c,
                  const std::vector<NodeId>& candidates) {
  NodeId best = candidates.front();
  double best_score = ucb_value(tree, node, best, c);
  for (std::size_t i = 1; i < candidates.size(); ++i) {
    const double s = ucb_value(tree, node, candidates[i], c);
    if (s > best_score || (s == best_score && candidates[i] < best)) {
      best = candidates[i];
      best_score = s;
    }
  }
  return best;
}

}  // namespace

NodeId ucb_select(const SearchTree& tree, NodeId node, double c) {
  const auto& children = tree.node(node).children;
  if (children.empty()) {
    throw Error(ErrorKind::NoChildren, "node " + std::to_string(node) + " has no children");
  }
  return argmax_ucb(tree, node, c, children);
}

LeafSelection global_leaf_select(const SearchTree& tree, double lambda) {
  std::vector<NodeId> leaves;
  for (NodeId id : tree.leaves()) {
    if (!tree.node(id).terminal) leaves.push_back(id);
  }
  return global_leaf_select(tree, leaves, lambda);
}

LeafSelection global_leaf_select(const SearchTree& tree, std::span<const NodeId> leaves,
                                 double lambda) {
  if (leaves.empty()) throw Error(ErrorKind::NoLeaves, "no non-terminal leaf to select");
  std::vector<NodeId> sorted(leaves.begin(), leaves.end());
  std::sort(sorted.begin(), sorted.end());

  const double count = static_cast<double>(sorted.size());
  double sum = 0.0;
  double lo = tree.node(sorted.front()).value;
  double hi = lo;
  for (NodeId id : sorted) {
    const double v = tree.node(id).value;
    sum += v;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  // Rounding can push the mean of equal values past them.
  const double mean = std::clamp(sum / count, lo, hi);
  double sq = 0.0;
  for (NodeId id : sorted) {
    const double d = tree.node(id).value - mean;
    sq += d * d;
  }
  LeafSelection out;
  out.stats.mean = mean;
  out.stats.stddev = std::sqrt(sq / count);
  out.stats.threshold = mean + lambda * out.stats.stddev;
  out.stats.leaf_count = static_cast<std::int64_t>(sorted.size());

  for (NodeId id : sorted) {
    if (tree.node(id).value > out.stats.threshold) out.leaves.push_back(id);
  }
  if (out.leaves.empty()) {
    NodeId best = sorted.front();
    for (NodeId id : sorted) {
      if (tree.node(id).value > tree.node(best).value) best = id;
    }
    out.leaves.push_back(best);
  }
  return out;
}

std::vector<NodeId> expand(SearchTree& tree, NodeId node, int k, const SearchContext& ctx) {
  const auto& target = tree.node(node);
  if (!target.children.empty() || target.terminal) {
    throw Error(ErrorKind::ConfigError,
                "node " + std::to_string(node) + " is not a non-terminal leaf");
  }
  if (target.depth >= ctx.config.max_depth) {
    throw Error(ErrorKind::DepthExceeded, "node " + std::to_string(node) + " is at max_depth " +
                                              std::to_string(ctx.config.max_depth));
  }
  auto prefix = prefix_of(tree, node, ctx.problem);
  const auto steps = backends::generate_steps(ctx.policy, prefix, k);

  std::vector<NodeId> added;
  std::set<std::string> seen;
  json verified = json::array();
  for (const auto& step : steps) {
    if (!seen.insert(textops::format_step(step)).second) continue;
    const NodeId id = tree.add_child(node, step);
    prefix.steps.push_back(step);
    auto& child = tree.node(id);
    child.terminal = textops::has_final_answer(prefix.text());
    prefix.steps.pop_back();
    if (ctx.config.tool_verification) {
      child.tool_mismatch = textops::has_mismatch(step);
      verified.push_back({{"node", id}, {"mismatch", child.tool_mismatch}});
    }
    added.push_back(id);
  }
  ctx.emit(TraceEventKind::Expanded, {{"node", node}, {"requested", k}, {"children", added}});
  if (ctx.config.tool_verification) {
    ctx.emit(TraceEventKind::ToolVerified, {{"node", node}, {"children", verified}});
  }
  return added;
}

double blend_reward(double reward, double sc, double alpha) {
  return (1.0 - alpha) * reward + alpha * sc;
}

double self_consistency(const SearchTree& tree, const std::string& answer) {
  if (tree.rollout_history.empty()) return 0.0;
  const std::string key = canonical_answer(answer);
  std::size_t same = 0;
  for (const auto& r : tree.rollout_history) {
    if (r.final_answer && canonical_answer(*r.final_answer) == key) ++same;
  }
  return static_cast<double>(same) / static_cast<double>(tree.rollout_history.size());
}

namespace {

std::map<std::string, std::size_t> answer_counts(const SearchTree& tree) {
  std::map<std::string, std::size_t> counts;
  for (const auto& r : tree.rollout_history) {
    if (r.final_answer) ++counts[canonical_answer(*r.final_answer)];
  }
  return counts;
}

double share(const std::map<std::string, std::size_t>& counts, std::size_t total,
             const std::string& answer) {
  if (total == 0) return 0.0;
  auto it = counts.find(canonical_answer(answer));
  return it == counts.end() ? 0.0 : static_cast<double>(it->second) / static_cast<double>(total);
}

std::string rollout_id(const std::string& problem_id, std::size_t index) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%06zu", index);
  return problem_id + "/r" + buf;
}

bool path_has_mismatch(const SearchTree& tree, NodeId node) {
  for (std::optional<NodeId> cur = node; cur; cur = tree.node(*cur).parent_id) {
    if (tree.node(*cur).tool_mismatch) return true;
  }
  return false;
}

struct Trajectory {
  CandidateSolution solution;
  bool tool_clean = true;
};

Trajectory run_rollout(const SearchTree& tree, NodeId child, std::size_t index,
                       const SearchContext& ctx, bool prefix_clean) {
  const auto prefix = prefix_of(tree, child, ctx.problem);
  auto policy = ctx.policy.fork(static_cast<std::uint64_t>(index));
  Trajectory t;
  t.solution = backends::rollout(*policy, prefix);
  t.solution.id = rollout_id(ctx.problem.id, index);
  t.solution.rm_score = backends::score_solution(ctx.reward, ctx.problem, t.solution).normalized_yes;
  t.tool_clean = prefix_clean;
  if (ctx.config.tool_verification && t.tool_clean) {
    for (std::size_t i = prefix.steps.size(); i < t.solution.steps.size(); ++i) {
      if (textops::has_mismatch(t.solution.steps[i])) {
        t.tool_clean = false;
        break;
      }
    }
  }
  return t;
}

Trajectory terminal_trajectory(const SearchTree& tree, NodeId child, std::size_t index,
                               const SearchContext& ctx, bool prefix_clean) {
  Trajectory t;
  auto& s = t.solution;
  s.id = rollout_id(ctx.problem.id, index);
  s.problem_id = ctx.problem.id;
  s.steps = tree.path_steps(child);
  s.final_answer = textops::extract_boxed(textops::format_prefix("", s.steps));
  s.raw_text = textops::format_solution(s);
  s.rm_score = backends::score_solution(ctx.reward, ctx.problem, s).normalized_yes;
  t.tool_clean = prefix_clean;
  return t;
}

std::vector<Trajectory> run_batch(const SearchTree& tree, NodeId child, int n,
                                  const SearchContext& ctx, bool prefix_clean) {
  const std::size_t base = tree.rollout_history.size();
  std::vector<Trajectory> out(static_cast<std::size_t>(n));
  const int threads = std::max(1, ctx.config.rollout_threads);
  if (threads == 1 || n == 1) {
    for (int i = 0; i < n; ++i) {
      out[static_cast<std::size_t>(i)] = run_rollout(tree, child, base + static_cast<std::size_t>(i), ctx, prefix_clean);
    }
    return out;
  }
  for (int start = 0; start < n; start += threads) {
    std::vector<std::future<Trajectory>> wave;
    for (int i = start; i < std::min(n, start + threads); ++i) {
      wave.push_back(std::async(std::launch::async, [&, i] {
        return run_rollout(tree, child, base + static_cast<std::size_t>(i), ctx, prefix_clean);
      }));
    }
    for (int i = start; i < std::min(n, start + threads); ++i) {
      out[static_cast<std::size_t>(i)] = wave[static_cast<std::size_t>(i - start)].get();
    }
  }
  return out;
}

}  // namespace

double simulate(SearchTree& tree, NodeId child, int n, double alpha, const SearchContext& ctx) {
  const bool prefix_clean = !(ctx.config.tool_verification && path_has_mismatch(tree, child));
  std::vector<Trajectory> batch;
  if (tree.node(child).terminal) {
    batch.push_back(terminal_trajectory(tree, child, tree.rollout_history.size(), ctx, prefix_clean));
  } else {
    if (n < 1) throw Error(ErrorKind::ConfigError, "simulate needs n >= 1");
    batch = run_batch(tree, child, n, ctx, prefix_clean);
  }
  for (auto& t : batch) {
    tree.rollout_history.push_back(t.solution);
    tree.rollout_notes.push_back(RolloutNote{child, t.tool_clean});
  }

  const auto counts = answer_counts(tree);
  json rewards = json::array();
  json sc_values = json::array();
  double sum = 0.0;
  for (const auto& t : batch) {
    const double r = *t.solution.rm_score;
    const double sc = t.solution.final_answer
                          ? share(counts, tree.rollout_history.size(), *t.solution.final_answer)
                          : 0.0;
    sum += blend_reward(r, sc, alpha);
    rewards.push_back(r);
    sc_values.push_back(sc);
  }
  double value = sum / static_cast<double>(batch.size());
  auto& node = tree.node(child);
  if (ctx.config.tool_verification && node.tool_mismatch) value *= ctx.config.tool_penalty_factor();
  node.value = value;
  ctx.emit(TraceEventKind::Simulated, {{"node", child},
                                       {"rollouts", batch.size()},
                                       {"rewards", rewards},
                                       {"sc", sc_values},
                                       {"value", value}});
  return value;
}

void backpropagate(SearchTree& tree, NodeId node, std::span<const double> child_values) {
  if (child_values.empty()) return;
  double sum = 0.0;
  for (double v : child_values) sum += v;
  const auto k = static_cast<std::int64_t>(child_values.size());
  for (std::optional<NodeId> cur = node; cur; cur = tree.node(*cur).parent_id) {
    auto& s = tree.node(*cur);
    s.value = (static_cast<double>(s.visits) * s.value + sum) / static_cast<double>(s.visits + k);
    s.visits += k;
  }
}

namespace {

// Expand, simulate every new child, and propagate; returns the new children.
std::vector<NodeId> expand_and_evaluate(SearchTree& tree, NodeId node, const SearchContext& ctx) {
  const auto& cfg = ctx.config;
  const auto children = expand(tree, node, cfg.children_per_expansion, ctx);
  std::vector<double> values;
  for (NodeId c : children) values.push_back(simulate(tree, c, cfg.rollouts_per_simulation, cfg.sc_alpha, ctx));
  backpropagate(tree, node, values);
  ctx.emit(TraceEventKind::Backpropagated, {{"node", node}, {"values", values}});
  return children;
}

bool expandable(const SearchTree& tree, NodeId id, const SearchConfig& cfg) {
  const auto& n = tree.node(id);
  return n.children.empty() && !n.terminal && n.depth < cfg.max_depth &&
         !(cfg.tool_verification && cfg.tool_blocks_expansion && n.tool_mismatch);
}

std::vector<NodeId> expandable_leaves(const SearchTree& tree, const SearchConfig& cfg) {
  std::vector<NodeId> out;
  for (NodeId id : tree.leaves()) {
    if (expandable(tree, id, cfg)) out.push_back(id);
  }
  return out;
}

// open[id]: the subtree under id still contains an expandable leaf. Children
// always carry larger ids than their parent.
std::vector<bool> open_nodes(const SearchTree& tree, const SearchConfig& cfg) {
  std::vector<bool> open(tree.nodes.size(), false);
  for (auto i = static_cast<std::int64_t>(tree.nodes.size()) - 1; i >= 0; --i) {
    const auto& n = tree.node(i);
    if (n.children.empty()) {
      open[static_cast<std::size_t>(i)] = expandable(tree, i, cfg);
    } else {
      for (NodeId c : n.children) {
        if (open[static_cast<std::size_t>(c)]) open[static_cast<std::size_t>(i)] = true;
      }
    }
  }
  return open;
}

std::optional<NodeId> descend(const SearchTree& tree, const SearchConfig& cfg, json& path) {
  const auto open = open_nodes(tree, cfg);
  NodeId node = tree.root_id;
  if (!open[static_cast<std::size_t>(node)]) return std::nullopt;
  path.push_back(node);
  while (!tree.node(node).children.empty()) {
    std::vector<NodeId> candidates;
    for (NodeId c : tree.node(node).children) {
      if (open[static_cast<std::size_t>(c)]) candidates.push_back(c);
    }
    node = argmax_ucb(tree, node, cfg.exploration_c, candidates);
    path.push_back(node);
  }
  return node;
}

struct Deadline {
  Clock::time_point start = Clock::now();
  std::int64_t limit_ms = 0;

  bool passed() const {
    return limit_ms > 0 &&
           std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - start).count() >= limit_ms;
  }
  double elapsed_ms() const {
    return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
  }
};

void validate_or_throw(const SearchConfig& config) {
  if (auto problems = validate(config); !problems.empty()) {
    throw Error(ErrorKind::ConfigError, "search config: " + problems.front());
  }
}

void choose_answer(SearchOutcome& out, const SearchConfig& cfg) {
  out.answer_source = cfg.answer_source;
  if (cfg.answer_source == AnswerSource::MajorityRollout) {
    out.answer = majority_answer(out.tree);
    if (out.answer) out.answer_score = self_consistency(out.tree, *out.answer);
  } else if (auto best = best_terminal(out.tree, cfg)) {
    out.answer = best->answer;
    out.answer_score = best->score;
  }
}

void finish(SearchOutcome& out, const SearchContext& ctx, const Deadline& deadline) {
  out.wall_time_ms = deadline.elapsed_ms();
  ctx.emit(TraceEventKind::Finished,
           {{"answer", out.answer ? json(*out.answer) : json(nullptr)},
            {"answer_source", to_string(out.answer_source)},
            {"steps_used", out.steps_used},
            {"nodes", out.tree.nodes.size()},
            {"rollouts", out.tree.rollout_history.size()}});
}

std::unique_ptr<backends::PolicyBackend> search_policy(const Problem& problem, const SearchConfig& config,
                                                       backends::PolicyBackend& policy) {
  return policy.fork(mix_seed(config.rng_seed, fnv1a(problem.id)));
}

}  // namespace

void pre_expand(SearchTree& tree, int layers, int k, const SearchContext& ctx) {
  if (layers < 0) throw Error(ErrorKind::ConfigError, "pre-expansion layers must be >= 0");
  if (layers == 0) return;
  SearchConfig cfg = ctx.config;
  cfg.children_per_expansion = k;
  const SearchContext local{ctx.problem, cfg, ctx.policy, ctx.reward, ctx.trace};

  const std::size_t before = tree.nodes.size();
  std::vector<NodeId> frontier{tree.root_id};
  for (int layer = 0; layer < layers && !frontier.empty(); ++layer) {
    std::vector<NodeId> next;
    for (NodeId id : frontier) {
      if (!expandable(tree, id, cfg)) continue;
      for (NodeId c : expand_and_evaluate(tree, id, local)) next.push_back(c);
    }
    frontier = std::move(next);
  }
  ctx.emit(TraceEventKind::PreExpanded,
           {{"layers", layers}, {"nodes_added", tree.nodes.size() - before}});
}

std::optional<std::string> majority_answer(const SearchTree& tree) {
  std::map<std::string, std::size_t> counts;
  for (const auto& r : tree.rollout_history) {
    if (r.final_answer) ++counts[canonical_answer(*r.final_answer)];
  }
  std::optional<std::string> best;
  std::size_t best_count = 0;
  for (const auto& [answer, count] : counts) {  // ascending: first max wins ties
    if (count > best_count) {
      best = answer;
      best_count = count;
    }
  }
  return best;
}

std::optional<ScoredTrajectory> best_terminal(const SearchTree& tree, const SearchConfig& config) {
  std::optional<ScoredTrajectory> best;
  const auto counts = answer_counts(tree);
  for (std::size_t i = 0; i < tree.rollout_history.size(); ++i) {
    const auto& r = tree.rollout_history[i];
    if (!r.final_answer) continue;
    double score = blend_reward(r.rm_score.value_or(0.0),
                                share(counts, tree.rollout_history.size(), *r.final_answer),
                                config.sc_alpha);
    const bool clean = i < tree.rollout_notes.size() ? tree.rollout_notes[i].tool_clean : true;
    if (config.tool_verification && !clean) score *= config.tool_penalty_factor();
    if (!best || score > best->score) best = ScoredTrajectory{i, *r.final_answer, score};
  }
  return best;
}

SearchOutcome run_search(const Problem& problem, const SearchConfig& config,
                         backends::PolicyBackend& policy, backends::RewardBackend& reward,
                         TraceLog* trace) {
  validate_or_throw(config);
  if (config.algorithm == Algorithm::Beam) return beam_search(problem, config, policy, reward, trace);

  Deadline deadline{Clock::now(), config.time_limit_ms};
  auto forked = search_policy(problem, config, policy);
  const SearchContext ctx{problem, config, *forked, reward, trace};
  SearchOutcome out;
  out.tree = SearchTree::with_root(problem.id);
  auto& tree = out.tree;

  pre_expand(tree, config.pre_expansion_layers, config.children_per_expansion, ctx);

  while (out.steps_used < config.step_budget && !deadline.passed()) {
    if (config.algorithm == Algorithm::MCTS) {
      json path = json::array();
      const auto leaf = descend(tree, config, path);
      if (!leaf) break;
      ctx.emit(TraceEventKind::Selected, {{"nodes", json::array({*leaf})}, {"path", path}});
      expand_and_evaluate(tree, *leaf, ctx);
      ++out.steps_used;
    } else {
      const auto candidates = expandable_leaves(tree, config);
      if (candidates.empty()) break;
      const auto selection = global_leaf_select(tree, candidates, config.lambda);
      json stats;
      stepsearch::to_json(stats, selection.stats);
      ctx.emit(TraceEventKind::Selected, {{"nodes", selection.leaves}, {"stats", stats}});
      for (NodeId leaf : selection.leaves) {
        if (out.steps_used >= config.step_budget) break;
        expand_and_evaluate(tree, leaf, ctx);
        ++out.steps_used;
      }
    }
  }

  choose_answer(out, config);
  finish(out, ctx, deadline);
  return out;
}

namespace {

double direct_score(SearchTree& tree, NodeId id, const SearchContext& ctx) {
  const auto prefix = prefix_of(tree, id, ctx.problem);
  CandidateSolution partial;
  partial.problem_id = ctx.problem.id;
  partial.steps = prefix.steps;
  partial.raw_text = prefix.text();
  auto& node = tree.node(id);
  if (node.terminal) partial.final_answer = textops::extract_boxed(partial.raw_text);
  double value = backends::score_solution(ctx.reward, ctx.problem, partial).normalized_yes;
  if (node.terminal) {
    partial.id = rollout_id(ctx.problem.id, tree.rollout_history.size());
    partial.raw_text = textops::format_solution(partial);
    partial.rm_score = value;
    tree.rollout_history.push_back(partial);
    tree.rollout_notes.push_back(
        RolloutNote{id, !(ctx.config.tool_verification && path_has_mismatch(tree, id))});
  }
  if (ctx.config.tool_verification && node.tool_mismatch) value *= ctx.config.tool_penalty_factor();
  node.value = value;
  ctx.emit(TraceEventKind::Simulated, {{"node", id}, {"rollouts", 0}, {"value", value}});
  return value;
}

}  // namespace

SearchOutcome beam_search(const Problem& problem, const SearchConfig& config,
                          backends::PolicyBackend& policy, backends::RewardBackend& reward,
                          TraceLog* trace) {
  validate_or_throw(config);
  Deadline deadline{Clock::now(), config.time_limit_ms};
  auto forked = search_policy(problem, config, policy);
  const SearchContext ctx{problem, config, *forked, reward, trace};
  SearchOutcome out;
  out.tree = SearchTree::with_root(problem.id);
  auto& tree = out.tree;

  const auto width = static_cast<std::size_t>(config.beam_width);
  const int total = config.children_per_expansion * config.beam_width;
  std::vector<NodeId> beams{tree.root_id};

  while (out.steps_used < config.step_budget && !deadline.passed()) {
    std::vector<NodeId> live;
    std::vector<NodeId> pool;
    for (NodeId b : beams) (expandable(tree, b, config) ? live : pool).push_back(b);
    if (live.empty()) break;
    const int per_beam = (total + static_cast<int>(live.size()) - 1) / static_cast<int>(live.size());

    for (NodeId b : live) {
      if (out.steps_used >= config.step_budget) {
        pool.push_back(b);
        continue;
      }
      const auto children = expand(tree, b, per_beam, ctx);
      std::vector<double> values;
      for (NodeId c : children) {
        values.push_back(config.beam_scoring == BeamScoring::Direct
                             ? direct_score(tree, c, ctx)
                             : simulate(tree, c, config.rollouts_per_simulation, config.sc_alpha, ctx));
      }
      backpropagate(tree, b, values);
      ctx.emit(TraceEventKind::Backpropagated, {{"node", b}, {"values", values}});
      ++out.steps_used;
      pool.insert(pool.end(), children.begin(), children.end());
    }

    std::sort(pool.begin(), pool.end(), [&tree](NodeId a, NodeId b) {
      const double va = tree.node(a).value;
      const double vb = tree.node(b).value;
      return va != vb ? va > vb : a < b;
    });
    if (pool.size() > width) pool.resize(width);
    beams = std::move(pool);
    ctx.emit(TraceEventKind::Selected, {{"nodes", beams}});
  }

  std::optional<NodeId> best;
  for (NodeId b : beams) {
    if (tree.node(b).terminal && (!best || tree.node(b).value > tree.node(*best).value)) best = b;
  }
  if (best) {
    out.answer_source = config.answer_source;
    out.answer = textops::extract_boxed(prefix_of(tree, *best, problem).text());
    out.answer_score = tree.node(*best).value;
  } else {
    choose_answer(out, config);
  }
  finish(out, ctx, deadline);
  return out;
}

}  // namespace stepsearch::search
