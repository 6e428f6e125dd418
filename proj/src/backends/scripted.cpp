#include "stepsearch/backends/scripted.hpp"

#include <algorithm>
#include <charconv>

#include "stepsearch/core/answer.hpp"
#include "stepsearch/core/error.hpp"
#include "stepsearch/textops/format.hpp"

namespace stepsearch::backends {
namespace {

constexpr std::string_view kTitlePrefix = "Consider option ";

std::uint64_t path_key(std::uint64_t key, std::span<const int> path) {
  std::uint64_t h = key;
  for (int j : path) h = mix_seed(h, static_cast<std::uint64_t>(j));
  return h;
}

std::optional<long long> as_integer(const std::string& answer) {
  const std::string canon = canonical_answer(answer);
  long long v = 0;
  auto [ptr, ec] = std::from_chars(canon.data(), canon.data() + canon.size(), v);
  if (ec != std::errc{} || ptr != canon.data() + canon.size()) return std::nullopt;
  return v;
}

}  // namespace

ScriptedWorld::ScriptedWorld(WorldSpec spec) : spec_(spec) {
  if (spec_.branching < 1 || spec_.depth < 1 || spec_.depth > kMaxRolloutSteps) {
    throw Error(ErrorKind::ConfigError, "scripted world needs branching >= 1 and depth in [1, 40]");
  }
  if (spec_.distractor_answers < 0) {
    throw Error(ErrorKind::ConfigError, "distractor_answers must be >= 0");
  }
}

std::uint64_t ScriptedWorld::problem_key(const Problem& problem) const {
  return mix_seed(spec_.seed, fnv1a(problem.id));
}

WorldPath ScriptedWorld::correct_path(const Problem& problem) const {
  const auto key = problem_key(problem);
  WorldPath path;
  for (int d = 1; d <= spec_.depth; ++d) {
    path.push_back(1 + static_cast<int>(mix_seed(key, static_cast<std::uint64_t>(d)) %
                                        static_cast<std::uint64_t>(spec_.branching)));
  }
  return path;
}

std::string ScriptedWorld::correct_answer(const Problem& problem) const {
  if (problem.ground_truth) return *problem.ground_truth;
  return std::to_string(100 + mix_seed(fnv1a(problem.id), 0x5eed) % 900);
}

bool ScriptedWorld::on_correct_path(const Problem& problem, std::span<const int> path) const {
  const auto correct = correct_path(problem);
  if (path.size() > correct.size()) return false;
  return std::equal(path.begin(), path.end(), correct.begin());
}

std::string ScriptedWorld::leaf_answer(const Problem& problem, std::span<const int> path) const {
  if (on_correct_path(problem, path) && static_cast<int>(path.size()) == spec_.depth) {
    return correct_answer(problem);
  }
  const auto truth = as_integer(correct_answer(problem));
  long long offset = 0;
  if (spec_.distractor_answers > 0) {
    offset = static_cast<long long>(splitmix64(path_key(problem_key(problem), path)) %
                                    static_cast<std::uint64_t>(spec_.distractor_answers));
  } else {
    // Base-b ordinal of the leaf: distinct per path.
    for (int j : path) offset = offset * spec_.branching + (j - 1);
  }
  if (truth) return std::to_string(*truth + 1 + offset);
  return "alt-" + std::to_string(offset);
}

bool ScriptedWorld::step_is_noisy(const Problem& problem, std::span<const int> path) const {
  if (spec_.step_noise <= 0.0 || on_correct_path(problem, path)) return false;
  return hash_uniform(mix_seed(path_key(problem_key(problem), path), 7)) < spec_.step_noise;
}

Step ScriptedWorld::step_at(const Problem& problem, std::span<const int> path) const {
  const auto depth = static_cast<int>(path.size());
  const auto key = path_key(problem_key(problem), path);
  const long long a = 2 + static_cast<long long>(mix_seed(key, 1) % 90);
  const long long b = 2 + static_cast<long long>(mix_seed(key, 2) % 90);
  const bool multiply = mix_seed(key, 3) % 2 == 0;
  long long c = multiply ? a * b : a + b;
  if (step_is_noisy(problem, path)) c += 1 + static_cast<long long>(mix_seed(key, 4) % 3);

  Step step;
  step.index = depth;
  step.title = std::string(kTitlePrefix) + std::to_string(path.back());
  step.body = "Following option " + std::to_string(path.back()) + " at depth " +
              std::to_string(depth) + ", we compute " + std::to_string(a) +
              (multiply ? " * " : " + ") + std::to_string(b) + " = " + std::to_string(c) + ".";
  if (depth == spec_.depth) {
    step.body += " Therefore the answer is \\boxed{" + leaf_answer(problem, path) + "}.";
  }
  return step;
}

WorldPath ScriptedWorld::decode_path(std::span<const Step> steps) const {
  WorldPath path;
  for (std::size_t i = 0; i < steps.size(); ++i) {
    const auto& title = steps[i].title;
    int j = 0;
    const bool ok =
        title.size() > kTitlePrefix.size() && title.compare(0, kTitlePrefix.size(), kTitlePrefix) == 0 &&
        std::from_chars(title.data() + kTitlePrefix.size(), title.data() + title.size(), j).ptr ==
            title.data() + title.size();
    if (!ok || j < 1 || j > spec_.branching || steps[i].index != static_cast<int>(i) + 1) {
      throw Error(ErrorKind::FormatError, "step '" + title + "' is not from this world");
    }
    path.push_back(j);
  }
  return path;
}

Problem ScriptedWorld::make_problem(const std::string& id) const {
  Problem p;
  p.id = id;
  p.statement = "Synthetic problem " + id + ": follow the options to the final value.";
  p.ground_truth = correct_answer(Problem{id, p.statement, std::nullopt});
  return p;
}

ScriptedPolicy::ScriptedPolicy(std::shared_ptr<const ScriptedWorld> world, std::uint64_t seed)
    : world_(std::move(world)), seed_(seed), rng_(mix_seed(world_->spec().seed, seed)) {}

PolicyCapabilities ScriptedPolicy::capabilities() const {
  return {true, true, world_->spec().branching};
}

std::vector<Step> ScriptedPolicy::propose_steps(const SolutionPrefix& prefix, int k) {
  auto path = world_->decode_path(prefix.steps);
  const int b = world_->spec().branching;
  if (static_cast<int>(path.size()) >= world_->spec().depth) {
    throw Error(ErrorKind::DepthExceeded, "scripted prefix is already at full depth");
  }
  int offset = 0;
  {
    std::lock_guard lock(mutex_);
    offset = static_cast<int>(rng_.below(static_cast<std::uint64_t>(b)));
  }
  std::vector<Step> out;
  path.push_back(0);
  for (int i = 0; i < k; ++i) {
    path.back() = (offset + i) % b + 1;
    out.push_back(world_->step_at(prefix.problem, path));
  }
  return out;
}

CandidateSolution ScriptedPolicy::complete(const SolutionPrefix& prefix) {
  const auto& spec = world_->spec();
  auto path = world_->decode_path(prefix.steps);
  const int start = static_cast<int>(path.size());
  if (start >= spec.depth) {
    throw Error(ErrorKind::DepthExceeded, "scripted prefix is already at full depth");
  }
  const auto correct = world_->correct_path(prefix.problem);
  const auto b = static_cast<std::uint64_t>(spec.branching);
  {
    std::lock_guard lock(mutex_);
    if (world_->on_correct_path(prefix.problem, path)) {
      int deviate_at = spec.depth;  // no deviation
      if (spec.branching > 1 && !rng_.bernoulli(spec.rollout_success)) {
        deviate_at = start + static_cast<int>(rng_.below(static_cast<std::uint64_t>(spec.depth - start)));
      }
      for (int d = start; d < spec.depth; ++d) {
        const int right = correct[static_cast<std::size_t>(d)];
        if (d < deviate_at) {
          path.push_back(right);
        } else if (d == deviate_at) {
          const auto shift = 1 + rng_.below(b - 1);
          path.push_back(static_cast<int>((static_cast<std::uint64_t>(right - 1) + shift) % b) + 1);
        } else {
          path.push_back(1 + static_cast<int>(rng_.below(b)));
        }
      }
    } else {
      for (int d = start; d < spec.depth; ++d) path.push_back(1 + static_cast<int>(rng_.below(b)));
    }
  }

  CandidateSolution out;
  out.problem_id = prefix.problem.id;
  out.rephrasing = prefix.rephrasing;
  out.steps = prefix.steps;
  for (int d = start + 1; d <= spec.depth; ++d) {
    out.steps.push_back(world_->step_at(prefix.problem, std::span(path).first(static_cast<std::size_t>(d))));
  }
  out.final_answer = world_->leaf_answer(prefix.problem, path);
  out.raw_text = textops::format_solution(out);
  return out;
}

std::unique_ptr<PolicyBackend> ScriptedPolicy::fork(std::uint64_t seed) const {
  return std::make_unique<ScriptedPolicy>(world_, mix_seed(seed_, seed));
}

OracleReward::OracleReward(std::shared_ptr<const ScriptedWorld> world) : world_(std::move(world)) {}

bool OracleReward::is_correct(const Problem& problem, const CandidateSolution& solution) const {
  if (solution.final_answer) {
    std::optional<std::string> truth = problem.ground_truth;
    if (!truth && world_) truth = world_->correct_answer(problem);
    return truth && answers_match(*solution.final_answer, *truth);
  }
  if (!world_) return false;
  try {
    return world_->on_correct_path(problem, world_->decode_path(solution.steps));
  } catch (const Error&) {
    return false;
  }
}

std::pair<double, double> OracleReward::yes_no_probabilities(const Problem& problem,
                                                             const CandidateSolution& solution) {
  return is_correct(problem, solution) ? std::pair{1.0, 0.0} : std::pair{0.0, 1.0};
}

NoisyReward::NoisyReward(std::shared_ptr<const ScriptedWorld> world, double flip_rate,
                         double jitter, std::uint64_t seed)
    : oracle_(std::move(world)), flip_rate_(flip_rate), jitter_(jitter), seed_(seed) {
  if (!(flip_rate >= 0.0 && flip_rate <= 1.0) || !(jitter >= 0.0 && jitter <= 1.0)) {
    throw Error(ErrorKind::ConfigError, "noisy reward needs flip_rate and jitter in [0,1]");
  }
}

std::pair<double, double> NoisyReward::yes_no_probabilities(const Problem& problem,
                                                            const CandidateSolution& solution) {
  const auto key = mix_seed(seed_, fnv1a(problem.id + "\n" + solution.raw_text));
  bool judged_correct = oracle_.is_correct(problem, solution);
  if (hash_uniform(key) < flip_rate_) judged_correct = !judged_correct;
  const double shift = jitter_ * hash_uniform(mix_seed(key, 1));
  const double p_yes = judged_correct ? 1.0 - shift : shift;
  return {p_yes, 1.0 - p_yes};
}

}  // namespace stepsearch::backends
