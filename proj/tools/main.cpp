#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "stepsearch/core/error.hpp"
#include "stepsearch/core/json_io.hpp"
#include "stepsearch/core/trace.hpp"
#include "stepsearch/datapipe/datapipe.hpp"
#include "stepsearch/eval/metrics.hpp"
#include "stepsearch/eval/runner.hpp"
#include "stepsearch/search/search.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace stepsearch;

namespace {

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir = ".";
  std::optional<int> workers;

  std::optional<std::string> algorithm;
  std::optional<int> budget;
  std::optional<double> c;
  std::optional<double> lambda;
  std::optional<int> k;
  std::optional<int> rollouts;
  std::optional<double> alpha;
  std::optional<int> beam_width;
  std::optional<int> pre_expand;
  std::optional<std::string> answer_source;
  bool tool_verification = false;
};

void add_common(CLI::App* app, Common& c, bool search_flags) {
  app->add_option("--config", c.config_path, "JSON config file");
  app->add_option("--seed", c.seed, "Seed overriding the config");
  app->add_option("--out-dir", c.out_dir, "Output directory");
  app->add_option("--workers", c.workers, "Worker threads");
  if (!search_flags) return;
  app->add_option("--algorithm", c.algorithm, "mcts, mcts_g or beam");
  app->add_option("--budget", c.budget, "Search step budget");
  app->add_option("--c", c.c, "UCB exploration constant");
  app->add_option("--lambda", c.lambda, "MCTS_G threshold weight");
  app->add_option("--k", c.k, "Children per expansion");
  app->add_option("--rollouts", c.rollouts, "Rollouts per simulation");
  app->add_option("--alpha", c.alpha, "Self-consistency weight");
  app->add_option("--beam-width", c.beam_width, "Beam width");
  app->add_option("--pre-expand", c.pre_expand, "Pre-expansion layers");
  app->add_option("--answer-source", c.answer_source, "best_terminal or majority_rollout");
  app->add_flag("--tool-verification", c.tool_verification, "Check step arithmetic");
}

eval::RunConfig resolve_config(const Common& c) {
  eval::RunConfig cfg = c.config_path.empty() ? eval::RunConfig{} : eval::load_run_config(c.config_path);
  json search;
  to_json(search, cfg.search);
  if (c.algorithm) search["algorithm"] = *c.algorithm;
  if (c.answer_source) search["answer_source"] = *c.answer_source;
  try {
    from_json(search, cfg.search);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::ConfigError, std::string("search flags: ") + e.what());
  }
  if (c.seed) cfg.search.rng_seed = *c.seed;
  if (c.budget) cfg.search.step_budget = *c.budget;
  if (c.c) cfg.search.exploration_c = *c.c;
  if (c.lambda) cfg.search.lambda = *c.lambda;
  if (c.k) cfg.search.children_per_expansion = *c.k;
  if (c.rollouts) cfg.search.rollouts_per_simulation = *c.rollouts;
  if (c.alpha) cfg.search.sc_alpha = *c.alpha;
  if (c.beam_width) cfg.search.beam_width = *c.beam_width;
  if (c.pre_expand) cfg.search.pre_expansion_layers = *c.pre_expand;
  if (c.tool_verification) cfg.search.tool_verification = true;
  if (c.workers) cfg.workers = *c.workers;
  if (c.seed) cfg.round.seed = *c.seed;
  if (auto problems = eval::validate(cfg); !problems.empty()) {
    throw Error(ErrorKind::ConfigError, problems.front());
  }
  return cfg;
}

fs::path out_path(const Common& c, const std::string& name) {
  fs::create_directories(c.out_dir);
  return fs::path(c.out_dir) / name;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::IoError, "cannot write " + path.string());
  out << text;
}

class Timer {
 public:
  std::chrono::system_clock::time_point started = std::chrono::system_clock::now();
  double elapsed_ms() const {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

void write_manifest(const Common& c, const std::string& command, const eval::RunConfig& cfg,
                    const Timer& timer, const json& extra = json::object()) {
  write_json_file(out_path(c, "manifest.json"),
                  eval::run_manifest(command, eval::to_json(cfg), cfg.search.rng_seed, timer.started,
                                     timer.elapsed_ms(), extra));
}

std::vector<CandidateSolution> solutions_or_generate(const std::string& path,
                                                     const std::vector<Problem>& problems,
                                                     const eval::Backends& b, int n,
                                                     std::uint64_t seed) {
  if (!path.empty()) return read_jsonl_as<CandidateSolution>(path);
  eval::log(eval::LogLevel::Info, "generating " + std::to_string(n) + " solutions per problem");
  return datapipe::generate_candidates(problems, *b.policy, n, seed);
}

void write_dataset(const fs::path& path, const LabeledDataset& d) {
  write_jsonl_from(path, d.entries);
}

int run_solve(const Common& c, const std::string& problem_path) {
  Timer timer;
  const auto cfg = resolve_config(c);
  const auto problems = eval::load_problems(problem_path);
  if (problems.size() != 1) throw Error(ErrorKind::ConfigError, "solve expects exactly one problem");
  const auto backends = eval::make_backends(cfg);
  TraceLog trace(out_path(c, "trace.jsonl"));
  const auto outcome = search::run_search(problems.front(), cfg.search, *backends.policy,
                                          *backends.reward, &trace);
  json result = search::to_json(outcome);
  result.erase("wall_time_ms");
  write_json_file(out_path(c, "outcome.json"), result);
  write_manifest(c, "solve", cfg, timer,
                 {{"problem", problems.front().id}, {"search_wall_time_ms", outcome.wall_time_ms}});
  std::cout << json{{"problem", problems.front().id},
                    {"answer", outcome.answer ? json(*outcome.answer) : json(nullptr)},
                    {"steps_used", outcome.steps_used}}
                   .dump()
            << "\n";
  return 0;
}

std::string dataset_name(const std::string& path) { return fs::path(path).stem().string(); }

std::optional<eval::TableRow> baseline_row(const std::string& path, const std::string& dataset) {
  if (path.empty()) return std::nullopt;
  const auto records = read_jsonl_as<eval::Record>(path);
  return eval::TableRow{"baseline", {{dataset, eval::accuracy(records)}}};
}

void write_report(const Common& c, const eval::EvalReport& report, const std::string& baseline) {
  write_json_file(out_path(c, "report.json"), eval::to_json(report));
  const eval::TableRow row{report.method, {{report.dataset, report.aggregates.at("accuracy")}}};
  std::string table = eval::render_table({row}, baseline_row(baseline, report.dataset));
  for (const auto& [key, value] : report.aggregates) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.4f", value);
    table += key + " = " + buf + "\n";
  }
  table += "Note: majority-vote ties resolve to the lexicographically smallest canonical answer.\n";
  write_text(out_path(c, "report.txt"), table);
  std::cout << table;
}

int run_bench(const Common& c, const std::string& problems_path, const std::string& method, int n,
              std::vector<int> ks, const std::string& baseline) {
  Timer timer;
  const auto cfg = resolve_config(c);
  const auto problems = eval::load_problems(problems_path);
  const auto backends = eval::make_backends(cfg);
  eval::BenchOptions options;
  options.method = eval::parse_method(method);
  options.n = n;
  options.workers = cfg.workers;
  options.seed = cfg.search.rng_seed;
  auto records = eval::bench(problems, backends, cfg.search, options);
  write_jsonl_from(out_path(c, "records.jsonl"), records);

  if (ks.empty()) ks.push_back(options.method == eval::Method::Search ? 1 : n);
  std::vector<int> ns;
  if (options.method != eval::Method::Cot) ns.push_back(options.method == eval::Method::Bon ? n : 1);
  auto report = eval::make_report(dataset_name(problems_path), method, std::move(records), ks, ns);
  report.runtime = {{"elapsed_ms", timer.elapsed_ms()}, {"workers", cfg.workers}};
  write_report(c, report, baseline);
  write_manifest(c, "bench", cfg, timer, {{"method", method}, {"n", n}, {"problems", problems.size()}});
  return 0;
}

int run_eval(const Common& c, const std::string& records_path, std::vector<int> ks, std::vector<int> ns,
             const std::string& baseline, std::string dataset, const std::string& method) {
  Timer timer;
  const auto cfg = resolve_config(c);
  auto records = read_jsonl_as<eval::Record>(records_path);
  if (dataset.empty()) dataset = dataset_name(records_path);
  auto report = eval::make_report(dataset, method, std::move(records), ks, ns);
  report.runtime = {{"elapsed_ms", timer.elapsed_ms()}};
  write_report(c, report, baseline);
  write_manifest(c, "eval", cfg, timer, {{"records", records_path}});
  return 0;
}

int run_build_rm_data(const Common& c, const std::string& problems_path, const std::string& solutions_path,
                      int n) {
  Timer timer;
  const auto cfg = resolve_config(c);
  const auto problems = eval::load_problems(problems_path);
  const auto backends = eval::make_backends(cfg);
  const auto solutions = solutions_or_generate(solutions_path, problems, backends, n, cfg.round.seed);
  const auto original = datapipe::label_solutions(problems, solutions);
  const auto cleaned = datapipe::debias(datapipe::dedup(original, cfg.dedup), cfg.round.seed);
  write_dataset(out_path(c, "original.jsonl"), original);
  write_dataset(out_path(c, "cleaned.jsonl"), cleaned);
  std::vector<fs::path> sources{problems_path};
  if (!solutions_path.empty()) sources.emplace_back(solutions_path);
  json dedup_json;
  datapipe::to_json(dedup_json, cfg.dedup);
  write_manifest(c, "build-rm-data", cfg, timer,
                 {{"datasets",
                   {datapipe::dataset_manifest(original, cfg.round.seed, dedup_json, sources),
                    datapipe::dataset_manifest(cleaned, cfg.round.seed, dedup_json, sources)}}});
  return 0;
}

int run_pref_pairs(const Common& c, const std::string& problems_path, const std::string& solutions_path,
                   int n) {
  Timer timer;
  const auto cfg = resolve_config(c);
  const auto problems = eval::load_problems(problems_path);
  const auto backends = eval::make_backends(cfg);
  const auto solutions = solutions_or_generate(solutions_path, problems, backends, n, cfg.round.seed);
  const auto pairs = datapipe::build_preference_pairs(problems, solutions, *backends.reward);
  write_jsonl_from(out_path(c, "pairs.jsonl"), pairs);
  write_manifest(c, "build-pref-pairs", cfg, timer, {{"pairs", pairs.size()}});
  return 0;
}

int run_select_active(const Common& c, const std::string& problems_path, const std::string& solutions_path,
                      int n, int top_m) {
  Timer timer;
  const auto cfg = resolve_config(c);
  const auto problems = eval::load_problems(problems_path);
  const auto backends = eval::make_backends(cfg);
  const auto solutions = solutions_or_generate(solutions_path, problems, backends, n, cfg.round.seed);
  const auto original = datapipe::label_solutions(problems, solutions);
  const auto active = datapipe::active_select(original, *backends.reward, top_m, cfg.dedup);
  write_dataset(out_path(c, "active.jsonl"), active);
  json config = {{"top_m", top_m}};
  datapipe::to_json(config["dedup"], cfg.dedup);
  std::vector<fs::path> sources{problems_path};
  if (!solutions_path.empty()) sources.emplace_back(solutions_path);
  write_manifest(c, "select-active", cfg, timer,
                 {{"datasets", {datapipe::dataset_manifest(active, cfg.round.seed, config, sources)}}});
  return 0;
}

int run_iterate(const Common& c, const std::string& problems_path, int rounds,
                const std::string& reward_trainer_name, bool active) {
  Timer timer;
  auto cfg = resolve_config(c);
  if (active) cfg.round.active_learning = true;
  const auto problems = eval::load_problems(problems_path);
  auto backends = eval::make_backends(cfg);

  std::unique_ptr<datapipe::RewardTrainer> reward_trainer;
  if (reward_trainer_name == "identity") {
    reward_trainer = std::make_unique<datapipe::IdentityRewardTrainer>();
  } else if (reward_trainer_name == "oracle") {
    reward_trainer = std::make_unique<datapipe::ReplacementRewardTrainer>(
        std::make_shared<backends::OracleReward>(backends.world));
  } else {
    throw Error(ErrorKind::ConfigError, "unknown reward trainer '" + reward_trainer_name + "'");
  }
  datapipe::IdentityPolicyTrainer policy_trainer;

  json reports = json::array();
  auto policy = backends.policy;
  auto reward = backends.reward;
  for (int i = 1; i <= rounds; ++i) {
    auto round_cfg = cfg.round;
    auto result = datapipe::iterate_round(policy, reward, problems, *reward_trainer, policy_trainer, round_cfg);
    const std::string dir = "round_" + std::to_string(i);
    fs::create_directories(fs::path(c.out_dir) / dir);
    write_dataset(out_path(c, dir + "/original.jsonl"), result.original);
    write_dataset(out_path(c, dir + "/cleaned.jsonl"), result.cleaned);
    if (result.active) write_dataset(out_path(c, dir + "/active.jsonl"), *result.active);
    write_jsonl_from(out_path(c, dir + "/pairs.jsonl"), result.pairs);
    write_json_file(out_path(c, dir + "/report.json"), result.report);
    reports.push_back(result.report);
    policy = result.policy;
    reward = result.reward;
  }
  write_manifest(c, "iterate", cfg, timer, {{"rounds", rounds}, {"reward_trainer", reward_trainer_name}});
  std::cout << reports.dump(2) << "\n";
  return 0;
}

int report_error(const std::string& kind, const std::string& message, int code) {
  std::cerr << json{{"error", kind}, {"message", message}, {"exit_code", code}}.dump() << "\n";
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Reward-guided step-level tree search for math reasoning"};
  app.require_subcommand(1);

  Common common;

  std::string problem_path;
  auto* solve = app.add_subcommand("solve", "Search one problem");
  add_common(solve, common, true);
  solve->add_option("--problem", problem_path, "Problem JSON file")->required();

  std::string problems_path, method = "search", baseline, solutions_path;
  int n = 1;
  std::vector<int> ks;
  auto* bench = app.add_subcommand("bench", "Run a method over a problem set");
  add_common(bench, common, true);
  bench->add_option("--problems", problems_path, "Problems JSONL")->required();
  bench->add_option("--method", method, "cot, bon or search");
  bench->add_option("--n", n, "Samples per problem for cot and bon");
  bench->add_option("--maj-k", ks, "k values for maj@k and pass@k");
  bench->add_option("--baseline", baseline, "Baseline records JSONL for the gain column");

  int gen_n = 8;
  auto* rm = app.add_subcommand("build-rm-data", "Label, dedup and debias reward-model data");
  add_common(rm, common, false);
  rm->add_option("--problems", problems_path, "Problems JSONL")->required();
  rm->add_option("--solutions", solutions_path, "Solutions JSONL (generated when absent)");
  rm->add_option("--n", gen_n, "Solutions to generate per problem");

  auto* pairs = app.add_subcommand("build-pref-pairs", "Build one preference pair per problem");
  add_common(pairs, common, false);
  pairs->add_option("--problems", problems_path, "Problems JSONL")->required();
  pairs->add_option("--solutions", solutions_path, "Solutions JSONL (generated when absent)");
  pairs->add_option("--n", gen_n, "Solutions to generate per problem");

  int top_m = 4;
  auto* active = app.add_subcommand("select-active", "Select top-ranked solutions per label");
  add_common(active, common, false);
  active->add_option("--problems", problems_path, "Problems JSONL")->required();
  active->add_option("--solutions", solutions_path, "Solutions JSONL (generated when absent)");
  active->add_option("--n", gen_n, "Solutions to generate per problem");
  active->add_option("--top-m", top_m, "Solutions kept per label and problem");

  int rounds = 1;
  std::string reward_trainer = "identity";
  bool use_active = false;
  auto* iterate = app.add_subcommand("iterate", "Run training-data rounds with trainer stubs");
  add_common(iterate, common, false);
  iterate->add_option("--problems", problems_path, "Problems JSONL")->required();
  iterate->add_option("--rounds", rounds, "Number of rounds");
  iterate->add_option("--reward-trainer", reward_trainer, "identity or oracle");
  iterate->add_flag("--active", use_active, "Train the reward model on the active-learning set");

  std::string records_path, dataset, eval_method = "records";
  std::vector<int> eval_ks, eval_ns;
  auto* ev = app.add_subcommand("eval", "Compute metrics over a records file");
  add_common(ev, common, false);
  ev->add_option("--records", records_path, "Records JSONL")->required();
  ev->add_option("--k", eval_ks, "k values for maj@k and pass@k");
  ev->add_option("--n", eval_ns, "N values for best-of-N");
  ev->add_option("--baseline", baseline, "Baseline records JSONL for the gain column");
  ev->add_option("--dataset", dataset, "Dataset name for the table");
  ev->add_option("--method", eval_method, "Method name for the table");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report_error("config_error", e.what(), 1);
  }

  try {
    if (*solve) return run_solve(common, problem_path);
    if (*bench) return run_bench(common, problems_path, method, n, ks, baseline);
    if (*rm) return run_build_rm_data(common, problems_path, solutions_path, gen_n);
    if (*pairs) return run_pref_pairs(common, problems_path, solutions_path, gen_n);
    if (*active) return run_select_active(common, problems_path, solutions_path, gen_n, top_m);
    if (*iterate) return run_iterate(common, problems_path, rounds, reward_trainer, use_active);
    if (*ev) return run_eval(common, records_path, eval_ks, eval_ns, baseline, dataset, eval_method);
  } catch (const Error& e) {
    return report_error(std::string(to_string(e.kind())), e.what(), eval::exit_code_for(e.kind()));
  } catch (const std::exception& e) {
    return report_error("internal_error", e.what(), 2);
  }
  return 0;
}
