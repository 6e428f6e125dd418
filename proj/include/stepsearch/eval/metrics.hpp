#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "stepsearch/core/types.hpp"

namespace stepsearch::eval {

// One evaluated problem. `samples` and `scores` are parallel when scores are
// present; `answer` is the method's single reported answer.
struct Record {
  std::string problem_id;
  std::string ground_truth;
  std::optional<std::string> answer;
  std::vector<std::string> samples;
  std::vector<double> scores;

  bool operator==(const Record&) const = default;
};

void to_json(nlohmann::json& j, const Record& v);
void from_json(const nlohmann::json& j, Record& v);

bool is_correct(const std::optional<std::string>& answer, const std::string& ground_truth);

double accuracy(std::span<const Record> records);

// Plurality canonical answer, ties to the lexicographically smallest one.
std::optional<std::string> plurality(std::span<const std::string> answers);

int maj_at_k(std::span<const std::string> answers, const std::string& ground_truth);
int pass_at_k(std::span<const std::string> answers, const std::string& ground_truth);

// 1 iff the highest normalized_yes solution (ties to the smallest id) is
// correct. Throws Error(ConfigError) for an unscored solution.
int best_of_n(std::span<const CandidateSolution> solutions, const std::string& ground_truth);

// Same rule over a record's first n samples and scores.
int best_of_n(const Record& record, std::size_t n);

struct EvalReport {
  std::string dataset;
  std::string method;
  std::vector<Record> records;
  // "accuracy", "maj@k", "pass@k", "bon@n"
  std::map<std::string, double> aggregates;
  nlohmann::json runtime = nlohmann::json::object();
};

nlohmann::json to_json(const EvalReport& report);
EvalReport report_from_json(const nlohmann::json& j);

// Aggregates for each requested k (maj@k, pass@k over the first k samples)
// and n (bon@n). Records with fewer samples than k use all they have.
EvalReport make_report(std::string dataset, std::string method, std::vector<Record> records,
                       std::span<const int> ks, std::span<const int> ns);

// Recomputes aggregates from the records and compares them exactly.
bool aggregates_consistent(const EvalReport& report);

struct TableRow {
  std::string method;
  std::map<std::string, double> accuracy;  // dataset -> accuracy in [0,1]
};

// Method rows by dataset columns. Cells show accuracy in percent; with a
// baseline row, a gain column per dataset follows:
//   gain = (acc - baseline) / baseline * 100.
std::string render_table(const std::vector<TableRow>& rows,
                         const std::optional<TableRow>& baseline = std::nullopt);

}  // namespace stepsearch::eval
