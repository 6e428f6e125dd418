#include "stepsearch/eval/runner.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <exception>
#include <fstream>
#include <iostream>
#include <mutex>
#include <thread>

#include "stepsearch/core/error.hpp"
#include "stepsearch/core/json_io.hpp"
#include "stepsearch/core/rng.hpp"
#include "stepsearch/search/search.hpp"

#ifndef STEPSEARCH_GIT_DESCRIBE
#define STEPSEARCH_GIT_DESCRIBE "unknown"
#endif

namespace stepsearch::eval {

using nlohmann::json;

namespace {

const char* backend_name(BackendKind k) { return k == BackendKind::Scripted ? "scripted" : "http"; }

const char* reward_name(RewardKind k) {
  switch (k) {
    case RewardKind::Oracle: return "oracle";
    case RewardKind::Noisy: return "noisy";
    case RewardKind::Http: return "http";
  }
  return "oracle";
}

json world_json(const backends::WorldSpec& w) {
  return {{"branching", w.branching},
          {"depth", w.depth},
          {"rollout_success", w.rollout_success},
          {"step_noise", w.step_noise},
          {"distractor_answers", w.distractor_answers},
          {"seed", w.seed}};
}

void world_from_json(const json& j, backends::WorldSpec& w) {
  w.branching = j.value("branching", w.branching);
  w.depth = j.value("depth", w.depth);
  w.rollout_success = j.value("rollout_success", w.rollout_success);
  w.step_noise = j.value("step_noise", w.step_noise);
  w.distractor_answers = j.value("distractor_answers", w.distractor_answers);
  w.seed = j.value("seed", w.seed);
}

}  // namespace

json to_json(const RunConfig& c) {
  json search, policy_http, reward_http, dedup, round;
  stepsearch::to_json(search, c.search);
  backends::to_json(policy_http, c.policy_http);
  backends::to_json(reward_http, c.reward_http);
  datapipe::to_json(dedup, c.dedup);
  datapipe::to_json(round, c.round);
  return {{"backend", backend_name(c.backend)},
          {"reward", reward_name(c.reward)},
          {"search", search},
          {"world", world_json(c.world)},
          {"noisy_reward", {{"flip_rate", c.flip_rate}, {"jitter", c.jitter}, {"seed", c.noise_seed}}},
          {"policy_http", policy_http},
          {"reward_http", reward_http},
          {"dedup", dedup},
          {"round", round},
          {"workers", c.workers}};
}

RunConfig run_config_from_json(const json& j) {
  RunConfig c;
  try {
    const auto backend = j.value("backend", std::string("scripted"));
    if (backend == "scripted") {
      c.backend = BackendKind::Scripted;
    } else if (backend == "http") {
      c.backend = BackendKind::Http;
    } else {
      throw Error(ErrorKind::ConfigError, "unknown backend '" + backend + "'");
    }
    const auto reward = j.value("reward", std::string(c.backend == BackendKind::Http ? "http" : "oracle"));
    if (reward == "oracle") {
      c.reward = RewardKind::Oracle;
    } else if (reward == "noisy") {
      c.reward = RewardKind::Noisy;
    } else if (reward == "http") {
      c.reward = RewardKind::Http;
    } else {
      throw Error(ErrorKind::ConfigError, "unknown reward '" + reward + "'");
    }
    if (j.contains("search")) stepsearch::from_json(j.at("search"), c.search);
    if (j.contains("world")) world_from_json(j.at("world"), c.world);
    if (j.contains("noisy_reward")) {
      const auto& n = j.at("noisy_reward");
      c.flip_rate = n.value("flip_rate", c.flip_rate);
      c.jitter = n.value("jitter", c.jitter);
      c.noise_seed = n.value("seed", c.noise_seed);
    }
    if (j.contains("policy_http")) backends::from_json(j.at("policy_http"), c.policy_http);
    if (j.contains("reward_http")) {
      backends::from_json(j.at("reward_http"), c.reward_http);
    } else {
      c.reward_http = c.policy_http;
      c.reward_http.model = "reward";
    }
    if (j.contains("dedup")) datapipe::from_json(j.at("dedup"), c.dedup);
    if (j.contains("round")) datapipe::from_json(j.at("round"), c.round);
    c.workers = j.value("workers", c.workers);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::ConfigError, std::string("config: ") + e.what());
  }
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  return run_config_from_json(read_json_file(path));
}

std::vector<std::string> validate(const RunConfig& c) {
  auto out = stepsearch::validate(c.search);
  for (auto& p : datapipe::validate(c.dedup)) out.push_back("dedup: " + p);
  if (c.workers < 1) out.push_back("workers must be >= 1");
  if (c.backend == BackendKind::Http) {
    for (auto& p : backends::validate(c.policy_http)) out.push_back("policy_http: " + p);
  }
  if (c.reward == RewardKind::Http) {
    for (auto& p : backends::validate(c.reward_http)) out.push_back("reward_http: " + p);
  }
  if (c.backend == BackendKind::Http && c.reward == RewardKind::Noisy) {
    out.push_back("noisy reward needs the scripted backend");
  }
  return out;
}

Backends make_backends(const RunConfig& config) {
  if (auto problems = validate(config); !problems.empty()) {
    throw Error(ErrorKind::ConfigError, problems.front());
  }
  Backends b;
  if (config.backend == BackendKind::Scripted) {
    b.world = std::make_shared<backends::ScriptedWorld>(config.world);
    b.policy = std::make_shared<backends::ScriptedPolicy>(b.world, config.world.seed);
  } else {
    b.policy = std::make_shared<backends::HttpPolicy>(
        std::make_shared<backends::ChatClient>(config.policy_http));
  }
  switch (config.reward) {
    case RewardKind::Oracle:
      b.reward = std::make_shared<backends::OracleReward>(b.world);
      break;
    case RewardKind::Noisy:
      b.reward = std::make_shared<backends::NoisyReward>(b.world, config.flip_rate, config.jitter,
                                                         config.noise_seed);
      break;
    case RewardKind::Http:
      b.reward = std::make_shared<backends::HttpReward>(
          std::make_shared<backends::ChatClient>(config.reward_http));
      break;
  }
  return b;
}

std::vector<Problem> load_problems(const std::filesystem::path& path) {
  std::vector<Problem> out;
  try {
    if (path.extension() == ".jsonl") {
      out = read_jsonl_as<Problem>(path);
    } else {
      const auto j = read_json_file(path);
      if (j.is_array()) {
        out = j.get<std::vector<Problem>>();
      } else {
        out.push_back(j.get<Problem>());
      }
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::ConfigError, path.string() + ": " + e.what());
  }
  if (auto problems = validate_problems(out); !problems.empty()) {
    throw Error(ErrorKind::ConfigError, path.string() + ": " + problems.front());
  }
  return out;
}

Method parse_method(const std::string& name) {
  if (name == "cot") return Method::Cot;
  if (name == "bon") return Method::Bon;
  if (name == "search") return Method::Search;
  throw Error(ErrorKind::ConfigError, "unknown method '" + name + "' (expected cot, bon or search)");
}

std::string to_string(Method method) {
  switch (method) {
    case Method::Cot: return "cot";
    case Method::Bon: return "bon";
    case Method::Search: return "search";
  }
  return "search";
}

namespace {

Record bench_one(const Problem& problem, const Backends& b, const SearchConfig& search,
                 const BenchOptions& options) {
  Record r;
  r.problem_id = problem.id;
  r.ground_truth = problem.ground_truth.value_or(b.world ? b.world->correct_answer(problem) : "");

  if (options.method == Method::Search) {
    SearchConfig cfg = search;
    cfg.rng_seed = options.seed;
    const auto outcome = search::run_search(problem, cfg, *b.policy, *b.reward);
    r.answer = outcome.answer;
    for (const auto& t : outcome.tree.rollout_history) {
      if (!t.final_answer) continue;
      r.samples.push_back(*t.final_answer);
      r.scores.push_back(t.rm_score.value_or(0.0));
    }
    return r;
  }

  auto stream = b.policy->fork(mix_seed(options.seed, fnv1a(problem.id)));
  backends::SolutionPrefix prefix;
  prefix.problem = problem;
  std::vector<CandidateSolution> solutions;
  for (int i = 0; i < options.n; ++i) {
    auto s = backends::rollout(*stream, prefix);
    char suffix[16];
    std::snprintf(suffix, sizeof suffix, "/s%04d", i);
    s.id = problem.id + suffix;
    if (options.method == Method::Bon) {
      s.rm_score = backends::score_solution(*b.reward, problem, s).normalized_yes;
    }
    r.samples.push_back(s.final_answer.value_or(""));
    if (s.rm_score) r.scores.push_back(*s.rm_score);
    solutions.push_back(std::move(s));
  }
  if (options.method == Method::Cot) {
    r.answer = solutions.front().final_answer;
  } else {
    std::size_t best = 0;
    for (std::size_t i = 1; i < solutions.size(); ++i) {
      if (*solutions[i].rm_score > *solutions[best].rm_score) best = i;
    }
    r.answer = solutions[best].final_answer;
  }
  return r;
}

}  // namespace

std::vector<Record> bench(const std::vector<Problem>& problems, const Backends& backends,
                          const SearchConfig& search, const BenchOptions& options) {
  if (options.n < 1) throw Error(ErrorKind::ConfigError, "n must be >= 1");
  std::vector<Record> records(problems.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < problems.size(); i = next++) {
      try {
        records[i] = bench_one(problems[i], backends, search, options);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = problems.size();
      }
    }
  };
  const int threads = std::max(1, std::min<int>(options.workers, static_cast<int>(problems.size())));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);
  std::sort(records.begin(), records.end(),
            [](const Record& a, const Record& b) { return a.problem_id < b.problem_id; });
  return records;
}

std::string git_describe() { return STEPSEARCH_GIT_DESCRIBE; }

json run_manifest(const std::string& command, const json& config, std::uint64_t seed,
                  std::chrono::system_clock::time_point started, double elapsed_ms, const json& extra) {
  const std::time_t t = std::chrono::system_clock::to_time_t(started);
  std::tm utc{};
  gmtime_r(&t, &utc);
  char stamp[32];
  std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", &utc);
  json m = {{"command", command},
            {"config", config},
            {"seed", seed},
            {"git_describe", git_describe()},
            {"started_at", stamp},
            {"elapsed_ms", elapsed_ms}};
  for (const auto& [k, v] : extra.items()) m[k] = v;
  return m;
}

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::ConfigError:
    case ErrorKind::IoError:
    case ErrorKind::UnknownProblem:
    case ErrorKind::MalformedFormat:
    case ErrorKind::UnbalancedBraces:
    case ErrorKind::ParseError:
      return 1;
    default:
      return 2;
  }
}

LogLevel log_level() {
  const char* env = std::getenv("STILL_LOG");
  const std::string v = env ? env : "";
  if (v == "error") return LogLevel::Error;
  if (v == "info") return LogLevel::Info;
  if (v == "debug") return LogLevel::Debug;
  return LogLevel::Warn;
}

void log(LogLevel level, const std::string& message) {
  static const char* names[] = {"error", "warn", "info", "debug"};
  if (static_cast<int>(level) > static_cast<int>(log_level())) return;
  static std::mutex mutex;
  std::lock_guard lock(mutex);
  std::cerr << "[" << names[static_cast<int>(level)] << "] " << message << "\n";
}

}  // namespace stepsearch::eval
