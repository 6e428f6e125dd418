#include <doctest.h>

#include <unistd.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "stepsearch/core/error.hpp"
#include "stepsearch/core/json_io.hpp"
#include "stepsearch/eval/metrics.hpp"
#include "stepsearch/eval/runner.hpp"
#include "support.hpp"

using namespace stepsearch;
using namespace stepsearch::eval;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

template <typename Fn>
ErrorKind kind_of(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("no error thrown");
  return ErrorKind::IoError;
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("stepsearch_eval_" + std::to_string(::getpid())) / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

int run_cli(const std::string& args, const fs::path& dir) {
  const std::string cmd = std::string(STEPSEARCH_CLI) + " " + args + " > " + (dir / "stdout.txt").string() +
                          " 2> " + (dir / "stderr.txt").string();
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Record record(const std::string& id, const std::string& truth, std::optional<std::string> answer,
              std::vector<std::string> samples = {}, std::vector<double> scores = {}) {
  return Record{id, truth, std::move(answer), std::move(samples), std::move(scores)};
}

}  // namespace

TEST_CASE("accuracy counts canonical matches") {
  std::vector<Record> records;
  for (int i = 0; i < 50; ++i) {
    const std::string id = "q" + std::to_string(i);
    if (i < 29) {
      records.push_back(record(id, "1/2", i % 2 ? "0.5" : "\\frac{1}{2}"));
    } else if (i < 40) {
      records.push_back(record(id, "1/2", "2"));
    } else {
      records.push_back(record(id, "1/2", std::nullopt));
    }
  }
  CHECK(accuracy(records) == doctest::Approx(0.58));
  CHECK(accuracy({}) == 0.0);
}

TEST_CASE("majority and pass examples") {
  const std::vector<std::string> a = {"4", "4", "5"};
  CHECK(maj_at_k(a, "4") == 1);
  CHECK(pass_at_k(a, "4") == 1);
  const std::vector<std::string> b = {"5", "5", "4"};
  CHECK(maj_at_k(b, "4") == 0);
  CHECK(pass_at_k(b, "4") == 1);
  const std::vector<std::string> tie = {"3", "2"};
  CHECK(plurality(tie) == "2");
  const std::vector<std::string> forms = {"0.5", "\\frac{1}{2}", "3"};
  CHECK(maj_at_k(forms, "1/2") == 1);
  CHECK(kind_of([] { maj_at_k({}, "1"); }) == ErrorKind::ConfigError);
  CHECK(kind_of([] { pass_at_k({}, "1"); }) == ErrorKind::ConfigError);
}

TEST_CASE("majority and pass match a counting oracle on every short sequence") {
  const std::vector<std::string> symbols = {"1", "2", "3"};
  for (std::size_t len = 1; len <= 4; ++len) {
    std::vector<std::size_t> digits(len, 0);
    while (true) {
      std::vector<std::string> answers;
      std::map<std::string, int> counts;
      for (auto d : digits) {
        answers.push_back(symbols[d]);
        ++counts[symbols[d]];
      }
      std::string winner;
      int best = 0;
      for (const auto& s : symbols) {
        if (counts[s] > best) {
          best = counts[s];
          winner = s;
        }
      }
      CHECK(plurality(answers) == winner);
      for (const auto& truth : symbols) {
        const int maj = maj_at_k(answers, truth);
        const int pass = pass_at_k(answers, truth);
        CHECK(maj == (winner == truth ? 1 : 0));
        CHECK(pass == (counts[truth] > 0 ? 1 : 0));
        CHECK(maj <= pass);
      }
      std::size_t i = 0;
      while (i < len && ++digits[i] == symbols.size()) digits[i++] = 0;
      if (i == len) break;
    }
  }
}

TEST_CASE("best-of-n picks the top score with smallest-id ties") {
  auto sol = [](std::string id, std::string answer, double score) {
    CandidateSolution s;
    s.id = std::move(id);
    s.final_answer = std::move(answer);
    s.rm_score = score;
    return s;
  };
  const std::vector<CandidateSolution> s = {sol("b", "7", 0.9), sol("a", "8", 0.9), sol("c", "9", 0.1)};
  CHECK(best_of_n(s, "8") == 1);
  CHECK(best_of_n(s, "7") == 0);
  auto unscored = s;
  unscored[2].rm_score.reset();
  CHECK(kind_of([&] { best_of_n(unscored, "8"); }) == ErrorKind::ConfigError);

  const auto r = record("p", "5", "5", {"4", "5", "5"}, {0.2, 0.8, 0.8});
  CHECK(best_of_n(r, 3) == 1);
  CHECK(best_of_n(r, 1) == 0);
}

TEST_CASE("report aggregates are consistent and survive json") {
  std::vector<Record> records = {record("b", "1", "1", {"1", "2", "2"}, {0.1, 0.5, 0.4}),
                                 record("a", "2", "3", {"2", "3", "3"}, {0.9, 0.2, 0.3}),
                                 record("c", "4", std::nullopt)};
  const std::vector<int> ks = {1, 3};
  const std::vector<int> ns = {3};
  auto report = make_report("toy", "bon", records, ks, ns);
  CHECK(report.records.front().problem_id == "a");
  CHECK(report.aggregates.at("accuracy") == doctest::Approx(1.0 / 3.0));
  CHECK(report.aggregates.at("maj@3") == doctest::Approx(0.0));
  CHECK(report.aggregates.at("pass@3") == doctest::Approx(2.0 / 3.0));
  CHECK(report.aggregates.at("maj@1") == doctest::Approx(2.0 / 3.0));
  CHECK(report.aggregates.at("bon@3") == doctest::Approx(1.0 / 3.0));
  CHECK(aggregates_consistent(report));
  const auto back = report_from_json(eval::to_json(report));
  CHECK(back.records == report.records);
  CHECK(back.aggregates == report.aggregates);
  CHECK(aggregates_consistent(back));
  report.aggregates["bon@3"] = 0.5;
  CHECK_FALSE(aggregates_consistent(report));
  const std::vector<int> bad = {0};
  CHECK(kind_of([&] { make_report("toy", "x", records, bad, ns); }) == ErrorKind::ConfigError);
}

TEST_CASE("table rendering with and without a baseline") {
  const TableRow search{"search", {{"gsm", 0.5}}};
  const TableRow cot{"cot", {{"gsm", 0.4}}};
  CHECK(render_table({search}, cot) ==
        "Method | gsm  | Gain (%)\n"
        "-------|------|---------\n"
        "cot    | 40.0 | -\n"
        "search | 50.0 | +25.0\n");
  const TableRow two{"bon", {{"gsm", 0.25}, {"math", 0.125}}};
  CHECK(render_table({two, search}) ==
        "Method | gsm  | math\n"
        "-------|------|-----\n"
        "bon    | 25.0 | 12.5\n"
        "search | 50.0 | -\n");
}

TEST_CASE("run config loading and validation") {
  const auto dir = scratch("config");
  write_file(dir / "good.json",
             R"({"reward": "noisy", "world": {"branching": 2, "depth": 3, "seed": 9},
                 "search": {"algorithm": "beam", "beam_width": 2}, "noisy_reward": {"flip_rate": 0.1},
                 "workers": 3})");
  const auto cfg = load_run_config(dir / "good.json");
  CHECK(cfg.reward == RewardKind::Noisy);
  CHECK(cfg.world.branching == 2);
  CHECK(cfg.world.seed == 9);
  CHECK(cfg.search.algorithm == Algorithm::Beam);
  CHECK(cfg.flip_rate == 0.1);
  CHECK(cfg.workers == 3);
  CHECK(validate(cfg).empty());
  CHECK(run_config_from_json(eval::to_json(cfg)).world.depth == 3);

  write_file(dir / "bad.json", R"({"backend": "carrier-pigeon"})");
  CHECK(kind_of([&] { load_run_config(dir / "bad.json"); }) == ErrorKind::ConfigError);
  write_file(dir / "broken.json", "{");
  CHECK(kind_of([&] { load_run_config(dir / "broken.json"); }) == ErrorKind::ConfigError);
  CHECK(kind_of([&] { load_run_config(dir / "missing.json"); }) == ErrorKind::IoError);

  RunConfig zero;
  zero.workers = 0;
  CHECK_FALSE(validate(zero).empty());
  CHECK(kind_of([&] { make_backends(zero); }) == ErrorKind::ConfigError);
  RunConfig http;
  http.backend = BackendKind::Http;
  http.reward = RewardKind::Noisy;
  CHECK_FALSE(validate(http).empty());
}

TEST_CASE("problem loading accepts jsonl, objects and arrays") {
  const auto dir = scratch("problems");
  write_file(dir / "a.jsonl", "{\"id\":\"x\",\"statement\":\"s\",\"ground_truth\":\"1\"}\n"
                              "{\"id\":\"y\",\"statement\":\"t\"}\n");
  write_file(dir / "b.json", R"({"id":"z","statement":"u","ground_truth":"2"})");
  write_file(dir / "c.json", R"([{"id":"p","statement":"v"},{"id":"q","statement":"w"}])");
  write_file(dir / "dup.json", R"([{"id":"p","statement":"v"},{"id":"p","statement":"w"}])");
  CHECK(load_problems(dir / "a.jsonl").size() == 2);
  CHECK(load_problems(dir / "b.json").front().ground_truth == "2");
  CHECK(load_problems(dir / "c.json").size() == 2);
  CHECK(kind_of([&] { load_problems(dir / "dup.json"); }) == ErrorKind::ConfigError);
}

TEST_CASE("exit codes and methods") {
  for (auto k : {ErrorKind::ConfigError, ErrorKind::IoError, ErrorKind::UnknownProblem, ErrorKind::ParseError,
                 ErrorKind::MalformedFormat, ErrorKind::UnbalancedBraces}) {
    CHECK(exit_code_for(k) == 1);
  }
  for (auto k : {ErrorKind::BackendUnavailable, ErrorKind::FormatError, ErrorKind::NonTerminating,
                 ErrorKind::MissingProbabilities, ErrorKind::NoLeaves, ErrorKind::DepthExceeded}) {
    CHECK(exit_code_for(k) == 2);
  }
  CHECK(parse_method("bon") == Method::Bon);
  CHECK(eval::to_string(Method::Cot) == "cot");
  CHECK(kind_of([] { parse_method("vibes"); }) == ErrorKind::ConfigError);
}

TEST_CASE("best-of-n under the oracle equals pass@n") {
  RunConfig cfg;
  cfg.world = {3, 3, 0.3, 0.0, 0, 5};
  const auto b = make_backends(cfg);
  const auto problems = testsupport::make_problems(*b.world, 60);
  BenchOptions options;
  options.method = Method::Bon;
  options.n = 6;
  const auto records = bench(problems, b, cfg.search, options);
  const std::vector<int> ks = {6};
  const std::vector<int> ns = {6};
  const auto report = make_report("w", "bon", records, ks, ns);
  CHECK(report.aggregates.at("bon@6") == report.aggregates.at("pass@6"));
  CHECK(report.aggregates.at("accuracy") == report.aggregates.at("bon@6"));
  CHECK(report.aggregates.at("pass@6") > 0.0);

  RunConfig noisy = cfg;
  noisy.reward = RewardKind::Noisy;
  noisy.flip_rate = 0.3;
  const auto nb = make_backends(noisy);
  const auto noisy_records = bench(problems, nb, cfg.search, options);
  const auto noisy_report = make_report("w", "bon", noisy_records, ks, ns);
  CHECK(noisy_report.aggregates.at("bon@6") <= noisy_report.aggregates.at("pass@6"));
  // The same policy stream feeds both runs, so the samples agree.
  for (std::size_t i = 0; i < records.size(); ++i) CHECK(records[i].samples == noisy_records[i].samples);
}

TEST_CASE("bench results do not depend on the worker count") {
  RunConfig cfg;
  cfg.world = {3, 3, 0.5, 0.0, 0, 2};
  cfg.search.step_budget = 20;
  const auto b = make_backends(cfg);
  const auto problems = testsupport::make_problems(*b.world, 16);
  for (auto method : {Method::Cot, Method::Bon, Method::Search}) {
    BenchOptions options;
    options.method = method;
    options.n = 3;
    options.seed = 4;
    const auto one = bench(problems, b, cfg.search, options);
    options.workers = 4;
    const auto four = bench(problems, b, cfg.search, options);
    CHECK(one == four);
    CHECK(one.size() == problems.size());
  }
}

TEST_CASE("manifest carries config, seed and timing") {
  const auto m = run_manifest("solve", json{{"a", 1}}, 42, std::chrono::system_clock::time_point{}, 12.5,
                              json{{"problem", "p"}});
  CHECK(m.at("command") == "solve");
  CHECK(m.at("seed") == 42);
  CHECK(m.at("started_at") == "1970-01-01T00:00:00Z");
  CHECK(m.at("elapsed_ms") == 12.5);
  CHECK(m.at("problem") == "p");
  CHECK(m.contains("git_describe"));
}

TEST_CASE("log level follows the environment") {
  ::unsetenv("STILL_LOG");
  CHECK(log_level() == LogLevel::Warn);
  ::setenv("STILL_LOG", "debug", 1);
  CHECK(log_level() == LogLevel::Debug);
  ::setenv("STILL_LOG", "error", 1);
  CHECK(log_level() == LogLevel::Error);
  ::unsetenv("STILL_LOG");
}

TEST_CASE("cli solve is reproducible") {
  const auto dir = scratch("solve");
  write_file(dir / "problem.json", R"({"id":"p0007","statement":"Scripted problem p0007."})");
  const std::string common = "solve --problem " + (dir / "problem.json").string() + " --seed 3 --budget 30";
  REQUIRE(run_cli(common + " --out-dir " + (dir / "one").string(), dir) == 0);
  const auto first_stdout = json::parse(slurp(dir / "stdout.txt"));
  REQUIRE(run_cli(common + " --out-dir " + (dir / "two").string(), dir) == 0);
  CHECK(json::parse(slurp(dir / "stdout.txt")) == first_stdout);
  const auto trace = slurp(dir / "one" / "trace.jsonl");
  CHECK_FALSE(trace.empty());
  CHECK(trace == slurp(dir / "two" / "trace.jsonl"));
  CHECK(slurp(dir / "one" / "outcome.json") == slurp(dir / "two" / "outcome.json"));
  const auto manifest = read_json_file(dir / "one" / "manifest.json");
  CHECK(manifest.at("seed") == 3);
  CHECK(manifest.at("config").at("search").at("step_budget") == 30);
  CHECK(first_stdout.at("problem") == "p0007");
}

TEST_CASE("cli bench and eval reports") {
  const auto dir = scratch("bench");
  {
    std::ofstream out(dir / "set.jsonl");
    for (int i = 0; i < 12; ++i) out << json{{"id", "p" + std::to_string(100 + i)}, {"statement", "s"}}.dump() << "\n";
  }
  REQUIRE(run_cli("bench --problems " + (dir / "set.jsonl").string() + " --method bon --n 10 --maj-k 10 --out-dir " +
                      (dir / "bon").string(),
                  dir) == 0);
  const auto bon = read_json_file(dir / "bon" / "report.json");
  CHECK(bon.at("aggregates").at("bon@10") == bon.at("aggregates").at("pass@10"));
  CHECK(slurp(dir / "bon" / "report.txt").find("Method") != std::string::npos);

  REQUIRE(run_cli("eval --records " + (dir / "bon" / "records.jsonl").string() + " --k 10 --n 10 --out-dir " +
                      (dir / "eval").string(),
                  dir) == 0);
  const auto ev = read_json_file(dir / "eval" / "report.json");
  for (const char* key : {"accuracy", "maj@10", "pass@10", "bon@10"}) CHECK(ev.at("aggregates").contains(key));
  CHECK(ev.at("records").size() == 12);
  CHECK(ev.at("notes").size() == 1);
  CHECK(aggregates_consistent(report_from_json(ev)));
}

TEST_CASE("cli errors map to exit codes") {
  const auto dir = scratch("errors");
  CHECK(run_cli("solve --problem " + (dir / "nope.json").string() + " --out-dir " + dir.string(), dir) == 1);
  CHECK(json::parse(slurp(dir / "stderr.txt")).at("error") == "io_error");
  CHECK(run_cli("bench --frobnicate", dir) == 1);
  write_file(dir / "p.json", R"({"id":"p","statement":"s"})");
  CHECK(run_cli("solve --problem " + (dir / "p.json").string() + " --algorithm astar --out-dir " + dir.string(),
                dir) == 1);
  CHECK(run_cli("solve --problem " + (dir / "p.json").string() + " --budget -1 --out-dir " + dir.string(), dir) == 1);
}
