#pragma once

#include <chrono>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "stepsearch/backends/http.hpp"
#include "stepsearch/backends/scripted.hpp"
#include "stepsearch/core/error.hpp"
#include "stepsearch/core/types.hpp"
#include "stepsearch/datapipe/datapipe.hpp"
#include "stepsearch/eval/metrics.hpp"

namespace stepsearch::eval {

enum class BackendKind { Scripted, Http };
enum class RewardKind { Oracle, Noisy, Http };

// Config file layout (JSON), each section optional:
//   {"backend": "scripted" | "http", "reward": "oracle" | "noisy" | "http",
//    "search": {...SearchConfig}, "world": {...WorldSpec},
//    "noisy_reward": {"flip_rate", "jitter", "seed"},
//    "policy_http": {...HttpBackendConfig}, "reward_http": {...},
//    "dedup": {...DedupConfig}, "round": {...RoundConfig}, "workers": 1}
struct RunConfig {
  BackendKind backend = BackendKind::Scripted;
  RewardKind reward = RewardKind::Oracle;
  SearchConfig search;
  backends::WorldSpec world;
  double flip_rate = 0.2;
  double jitter = 0.0;
  std::uint64_t noise_seed = 0;
  backends::HttpBackendConfig policy_http;
  backends::HttpBackendConfig reward_http;
  datapipe::DedupConfig dedup;
  datapipe::RoundConfig round;
  int workers = 1;
};

nlohmann::json to_json(const RunConfig& config);
RunConfig run_config_from_json(const nlohmann::json& j);
// Throws Error(IoError) or Error(ConfigError).
RunConfig load_run_config(const std::filesystem::path& path);
std::vector<std::string> validate(const RunConfig& config);

struct Backends {
  std::shared_ptr<const backends::ScriptedWorld> world;  // scripted only
  std::shared_ptr<backends::PolicyBackend> policy;
  std::shared_ptr<backends::RewardBackend> reward;
};

Backends make_backends(const RunConfig& config);

// Problems from JSONL, or from a JSON file holding one object or an array.
std::vector<Problem> load_problems(const std::filesystem::path& path);

enum class Method { Cot, Bon, Search };
Method parse_method(const std::string& name);
std::string to_string(Method method);

struct BenchOptions {
  Method method = Method::Search;
  int n = 1;           // samples per problem for cot and bon
  int workers = 1;
  std::uint64_t seed = 0;
};

// One record per problem, ordered by problem id. Every problem draws from
// its own policy stream, so results do not depend on the worker count.
std::vector<Record> bench(const std::vector<Problem>& problems, const Backends& backends,
                          const SearchConfig& search, const BenchOptions& options);

std::string git_describe();

// Config, seed, git describe, wall-clock start and duration.
nlohmann::json run_manifest(const std::string& command, const nlohmann::json& config,
                            std::uint64_t seed, std::chrono::system_clock::time_point started,
                            double elapsed_ms, const nlohmann::json& extra = nlohmann::json::object());

// 1 for configuration and input errors, 2 for backend and search failures.
int exit_code_for(ErrorKind kind);

enum class LogLevel { Error = 0, Warn = 1, Info = 2, Debug = 3 };
// From STILL_LOG (error, warn, info, debug); warn when unset.
LogLevel log_level();
void log(LogLevel level, const std::string& message);

}  // namespace stepsearch::eval
