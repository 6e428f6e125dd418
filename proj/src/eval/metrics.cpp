#include "stepsearch/eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include "stepsearch/core/answer.hpp"
#include "stepsearch/core/error.hpp"

namespace stepsearch::eval {

using nlohmann::json;

void to_json(json& j, const Record& v) {
  j = json{{"problem_id", v.problem_id},
           {"ground_truth", v.ground_truth},
           {"answer", v.answer ? json(*v.answer) : json(nullptr)},
           {"samples", v.samples},
           {"scores", v.scores}};
}

void from_json(const json& j, Record& v) {
  v.problem_id = j.at("problem_id").get<std::string>();
  v.ground_truth = j.at("ground_truth").get<std::string>();
  v.answer.reset();
  if (j.contains("answer") && !j.at("answer").is_null()) v.answer = j.at("answer").get<std::string>();
  v.samples = j.value("samples", std::vector<std::string>{});
  v.scores = j.value("scores", std::vector<double>{});
}

bool is_correct(const std::optional<std::string>& answer, const std::string& ground_truth) {
  return answer && answers_match(*answer, ground_truth);
}

double accuracy(std::span<const Record> records) {
  if (records.empty()) return 0.0;
  std::size_t right = 0;
  for (const auto& r : records) right += is_correct(r.answer, r.ground_truth) ? 1 : 0;
  return static_cast<double>(right) / static_cast<double>(records.size());
}

std::optional<std::string> plurality(std::span<const std::string> answers) {
  std::map<std::string, std::size_t> counts;
  for (const auto& a : answers) ++counts[canonical_answer(a)];
  std::optional<std::string> best;
  std::size_t best_count = 0;
  for (const auto& [answer, count] : counts) {
    if (count > best_count) {
      best = answer;
      best_count = count;
    }
  }
  return best;
}

int maj_at_k(std::span<const std::string> answers, const std::string& ground_truth) {
  if (answers.empty()) throw Error(ErrorKind::ConfigError, "maj@k needs k >= 1");
  return is_correct(plurality(answers), ground_truth) ? 1 : 0;
}

int pass_at_k(std::span<const std::string> answers, const std::string& ground_truth) {
  if (answers.empty()) throw Error(ErrorKind::ConfigError, "pass@k needs k >= 1");
  return std::any_of(answers.begin(), answers.end(),
                     [&](const std::string& a) { return answers_match(a, ground_truth); })
             ? 1
             : 0;
}

int best_of_n(std::span<const CandidateSolution> solutions, const std::string& ground_truth) {
  if (solutions.empty()) throw Error(ErrorKind::ConfigError, "best-of-n needs n >= 1");
  const CandidateSolution* best = nullptr;
  for (const auto& s : solutions) {
    if (!s.rm_score) throw Error(ErrorKind::ConfigError, "solution '" + s.id + "' is not scored");
    if (!best || *s.rm_score > *best->rm_score ||
        (*s.rm_score == *best->rm_score && s.id < best->id)) {
      best = &s;
    }
  }
  return is_correct(best->final_answer, ground_truth) ? 1 : 0;
}

int best_of_n(const Record& record, std::size_t n) {
  const std::size_t m = std::min({n, record.samples.size(), record.scores.size()});
  if (m == 0) throw Error(ErrorKind::ConfigError, "record '" + record.problem_id + "' has no scored samples");
  std::size_t best = 0;
  for (std::size_t i = 1; i < m; ++i) {
    if (record.scores[i] > record.scores[best]) best = i;
  }
  return answers_match(record.samples[best], record.ground_truth) ? 1 : 0;
}

namespace {

std::map<std::string, double> compute_aggregates(const std::vector<Record>& records,
                                                 const std::vector<int>& ks,
                                                 const std::vector<int>& ns) {
  std::map<std::string, double> agg;
  agg["accuracy"] = accuracy(records);
  const double count = records.empty() ? 1.0 : static_cast<double>(records.size());
  for (int k : ks) {
    double maj = 0.0, pass = 0.0;
    for (const auto& r : records) {
      if (r.samples.empty()) continue;
      const auto take = std::min(static_cast<std::size_t>(k), r.samples.size());
      const std::span<const std::string> first(r.samples.data(), take);
      maj += maj_at_k(first, r.ground_truth);
      pass += pass_at_k(first, r.ground_truth);
    }
    agg["maj@" + std::to_string(k)] = maj / count;
    agg["pass@" + std::to_string(k)] = pass / count;
  }
  for (int n : ns) {
    double bon = 0.0;
    for (const auto& r : records) {
      if (!r.samples.empty() && !r.scores.empty()) bon += best_of_n(r, static_cast<std::size_t>(n));
    }
    agg["bon@" + std::to_string(n)] = bon / count;
  }
  return agg;
}

std::vector<int> suffix_values(const std::map<std::string, double>& agg, const std::string& prefix) {
  std::vector<int> out;
  for (const auto& [key, value] : agg) {
    if (key.rfind(prefix, 0) == 0) out.push_back(std::stoi(key.substr(prefix.size())));
  }
  return out;
}

}  // namespace

EvalReport make_report(std::string dataset, std::string method, std::vector<Record> records,
                       std::span<const int> ks, std::span<const int> ns) {
  for (int k : ks) {
    if (k < 1) throw Error(ErrorKind::ConfigError, "k must be >= 1");
  }
  for (int n : ns) {
    if (n < 1) throw Error(ErrorKind::ConfigError, "n must be >= 1");
  }
  std::sort(records.begin(), records.end(),
            [](const Record& a, const Record& b) { return a.problem_id < b.problem_id; });
  EvalReport report;
  report.dataset = std::move(dataset);
  report.method = std::move(method);
  report.aggregates = compute_aggregates(records, {ks.begin(), ks.end()}, {ns.begin(), ns.end()});
  report.records = std::move(records);
  return report;
}

bool aggregates_consistent(const EvalReport& report) {
  return compute_aggregates(report.records, suffix_values(report.aggregates, "maj@"),
                            suffix_values(report.aggregates, "bon@")) == report.aggregates;
}

json to_json(const EvalReport& r) {
  json records = json::array();
  for (const auto& rec : r.records) records.push_back(rec);
  return json{{"dataset", r.dataset},
              {"method", r.method},
              {"aggregates", r.aggregates},
              {"records", records},
              {"runtime", r.runtime},
              {"notes", json::array({"majority-vote ties resolve to the lexicographically smallest canonical answer"})}};
}

EvalReport report_from_json(const json& j) {
  EvalReport r;
  r.dataset = j.at("dataset").get<std::string>();
  r.method = j.at("method").get<std::string>();
  r.aggregates = j.at("aggregates").get<std::map<std::string, double>>();
  r.records = j.at("records").get<std::vector<Record>>();
  r.runtime = j.value("runtime", json::object());
  return r;
}

namespace {

std::string pad(const std::string& s, std::size_t width) {
  return s.size() >= width ? s : s + std::string(width - s.size(), ' ');
}

std::string percent(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", v * 100.0);
  return buf;
}

}  // namespace

std::string render_table(const std::vector<TableRow>& rows, const std::optional<TableRow>& baseline) {
  std::set<std::string> dataset_set;
  for (const auto& r : rows) {
    for (const auto& [d, a] : r.accuracy) dataset_set.insert(d);
  }
  const std::vector<std::string> datasets(dataset_set.begin(), dataset_set.end());

  std::vector<std::vector<std::string>> cells;
  std::vector<std::string> header{"Method"};
  for (const auto& d : datasets) {
    header.push_back(d);
    if (baseline) header.push_back("Gain (%)");
  }
  cells.push_back(header);

  auto row_cells = [&](const TableRow& r, bool is_baseline) {
    std::vector<std::string> line{r.method};
    for (const auto& d : datasets) {
      auto it = r.accuracy.find(d);
      line.push_back(it == r.accuracy.end() ? "-" : percent(it->second));
      if (!baseline) continue;
      auto base = baseline->accuracy.find(d);
      if (is_baseline || it == r.accuracy.end() || base == baseline->accuracy.end() || base->second == 0.0) {
        line.push_back("-");
      } else {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%+.1f", (it->second - base->second) / base->second * 100.0);
        line.push_back(buf);
      }
    }
    return line;
  };
  if (baseline) cells.push_back(row_cells(*baseline, true));
  for (const auto& r : rows) cells.push_back(row_cells(r, false));

  std::vector<std::size_t> widths(header.size(), 0);
  for (const auto& line : cells) {
    for (std::size_t i = 0; i < line.size(); ++i) widths[i] = std::max(widths[i], line[i].size());
  }
  std::string out;
  for (std::size_t r = 0; r < cells.size(); ++r) {
    std::string line;
    for (std::size_t i = 0; i < cells[r].size(); ++i) {
      line += (i ? " | " : "") + pad(cells[r][i], widths[i]);
    }
    while (!line.empty() && line.back() == ' ') line.pop_back();
    out += line + "\n";
    if (r == 0) {
      std::string rule;
      for (std::size_t i = 0; i < widths.size(); ++i) rule += (i ? "-|-" : "") + std::string(widths[i], '-');
      out += rule + "\n";
    }
  }
  return out;
}

}  // namespace stepsearch::eval
