#include "stepsearch/core/json_io.hpp"

#include <fstream>

namespace stepsearch {

using nlohmann::json;

namespace {

template <typename T>
void put_optional(json& j, const char* key, const std::optional<T>& v) {
  j[key] = v ? json(*v) : json(nullptr);
}

template <typename T>
void get_optional(const json& j, const char* key, std::optional<T>& v) {
  if (auto it = j.find(key); it != j.end() && !it->is_null()) {
    v = it->get<T>();
  } else {
    v.reset();
  }
}

template <typename Enum, std::size_t N>
Enum enum_from(const json& j, const std::pair<Enum, const char*> (&table)[N]) {
  const auto s = j.get<std::string>();
  for (const auto& [value, name] : table) {
    if (s == name) return value;
  }
  throw json::other_error::create(501, "unknown enum value '" + s + "'", &j);
}

template <typename Enum, std::size_t N>
const char* enum_name(Enum e, const std::pair<Enum, const char*> (&table)[N]) {
  for (const auto& [value, name] : table) {
    if (value == e) return name;
  }
  return table[0].second;
}

constexpr std::pair<Label, const char*> kLabels[] = {
    {Label::Correct, "correct"},
    {Label::Incorrect, "incorrect"},
    {Label::Unlabeled, "unlabeled"}};
constexpr std::pair<Algorithm, const char*> kAlgorithms[] = {
    {Algorithm::MCTS, "mcts"},
    {Algorithm::MCTS_G, "mcts_g"},
    {Algorithm::Beam, "beam"}};
constexpr std::pair<AnswerSource, const char*> kSources[] = {
    {AnswerSource::BestTerminal, "best_terminal"},
    {AnswerSource::MajorityRollout, "majority_rollout"}};
constexpr std::pair<ToolPenaltyMode, const char*> kPenalties[] = {
    {ToolPenaltyMode::Hard, "hard"}, {ToolPenaltyMode::Soft, "soft"}};
constexpr std::pair<BeamScoring, const char*> kBeamScoring[] = {
    {BeamScoring::Rollout, "rollout"}, {BeamScoring::Direct, "direct"}};
constexpr std::pair<DatasetKind, const char*> kKinds[] = {
    {DatasetKind::Original, "original"},
    {DatasetKind::Cleaned, "cleaned"},
    {DatasetKind::ActiveLearning, "active_learning"}};
constexpr std::pair<TraceEventKind, const char*> kEvents[] = {
    {TraceEventKind::Selected, "selected"},
    {TraceEventKind::Expanded, "expanded"},
    {TraceEventKind::Simulated, "simulated"},
    {TraceEventKind::Backpropagated, "backpropagated"},
    {TraceEventKind::PreExpanded, "pre_expanded"},
    {TraceEventKind::ToolVerified, "tool_verified"},
    {TraceEventKind::Finished, "finished"}};

}  // namespace

void to_json(json& j, const Problem& v) {
  j = json{{"id", v.id}, {"statement", v.statement}};
  put_optional(j, "ground_truth", v.ground_truth);
}

void from_json(const json& j, Problem& v) {
  j.at("id").get_to(v.id);
  j.at("statement").get_to(v.statement);
  get_optional(j, "ground_truth", v.ground_truth);
}

void to_json(json& j, const Step& v) {
  j = json{{"index", v.index}, {"title", v.title}, {"body", v.body}};
}

void from_json(const json& j, Step& v) {
  j.at("index").get_to(v.index);
  j.at("title").get_to(v.title);
  j.at("body").get_to(v.body);
}

void to_json(json& j, const Label& v) { j = enum_name(v, kLabels); }
void from_json(const json& j, Label& v) { v = enum_from(j, kLabels); }

void to_json(json& j, const CandidateSolution& v) {
  j = json{{"id", v.id},
           {"problem_id", v.problem_id},
           {"rephrasing", v.rephrasing},
           {"steps", v.steps},
           {"raw_text", v.raw_text},
           {"label", v.label}};
  put_optional(j, "final_answer", v.final_answer);
  put_optional(j, "rm_score", v.rm_score);
}

void from_json(const json& j, CandidateSolution& v) {
  v.id = j.value("id", std::string{});
  j.at("problem_id").get_to(v.problem_id);
  v.rephrasing = j.value("rephrasing", std::string{});
  v.steps = j.value("steps", std::vector<Step>{});
  v.raw_text = j.value("raw_text", std::string{});
  v.label = j.contains("label") ? j.at("label").get<Label>() : Label::Unlabeled;
  get_optional(j, "final_answer", v.final_answer);
  get_optional(j, "rm_score", v.rm_score);
}

void to_json(json& j, const TreeNode& v) {
  j = json{{"node_id", v.node_id},
           {"children", v.children},
           {"value", v.value},
           {"visits", v.visits},
           {"terminal", v.terminal},
           {"depth", v.depth},
           {"tool_mismatch", v.tool_mismatch}};
  put_optional(j, "parent_id", v.parent_id);
  put_optional(j, "step", v.step);
}

void from_json(const json& j, TreeNode& v) {
  j.at("node_id").get_to(v.node_id);
  j.at("children").get_to(v.children);
  j.at("value").get_to(v.value);
  j.at("visits").get_to(v.visits);
  j.at("terminal").get_to(v.terminal);
  j.at("depth").get_to(v.depth);
  v.tool_mismatch = j.value("tool_mismatch", false);
  get_optional(j, "parent_id", v.parent_id);
  get_optional(j, "step", v.step);
}

void to_json(json& j, const RolloutNote& v) {
  j = json{{"origin", v.origin}, {"tool_clean", v.tool_clean}};
}

void from_json(const json& j, RolloutNote& v) {
  j.at("origin").get_to(v.origin);
  j.at("tool_clean").get_to(v.tool_clean);
}

void to_json(json& j, const SearchTree& v) {
  j = json{{"nodes", v.nodes},
           {"root_id", v.root_id},
           {"problem_id", v.problem_id},
           {"rollout_history", v.rollout_history},
           {"rollout_notes", v.rollout_notes}};
}

void from_json(const json& j, SearchTree& v) {
  j.at("nodes").get_to(v.nodes);
  j.at("root_id").get_to(v.root_id);
  j.at("problem_id").get_to(v.problem_id);
  j.at("rollout_history").get_to(v.rollout_history);
  v.rollout_notes = j.value("rollout_notes", std::vector<RolloutNote>{});
}

void to_json(json& j, const LeafStats& v) {
  j = json{{"mean", v.mean},
           {"stddev", v.stddev},
           {"threshold", v.threshold},
           {"leaf_count", v.leaf_count}};
}

void from_json(const json& j, LeafStats& v) {
  j.at("mean").get_to(v.mean);
  j.at("stddev").get_to(v.stddev);
  j.at("threshold").get_to(v.threshold);
  j.at("leaf_count").get_to(v.leaf_count);
}

void to_json(json& j, const SearchConfig& v) {
  j = json{{"algorithm", enum_name(v.algorithm, kAlgorithms)},
           {"exploration_c", v.exploration_c},
           {"lambda", v.lambda},
           {"children_per_expansion", v.children_per_expansion},
           {"rollouts_per_simulation", v.rollouts_per_simulation},
           {"sc_alpha", v.sc_alpha},
           {"beam_width", v.beam_width},
           {"pre_expansion_layers", v.pre_expansion_layers},
           {"step_budget", v.step_budget},
           {"max_depth", v.max_depth},
           {"tool_verification", v.tool_verification},
           {"rng_seed", v.rng_seed},
           {"tool_penalty", enum_name(v.tool_penalty, kPenalties)},
           {"tool_blocks_expansion", v.tool_blocks_expansion},
           {"answer_source", enum_name(v.answer_source, kSources)},
           {"beam_scoring", enum_name(v.beam_scoring, kBeamScoring)},
           {"time_limit_ms", v.time_limit_ms},
           {"rollout_threads", v.rollout_threads}};
}

// Missing keys keep their defaults so config files may be partial.
void from_json(const json& j, SearchConfig& v) {
  if (j.contains("algorithm")) v.algorithm = enum_from(j.at("algorithm"), kAlgorithms);
  v.exploration_c = j.value("exploration_c", v.exploration_c);
  v.lambda = j.value("lambda", v.lambda);
  v.children_per_expansion = j.value("children_per_expansion", v.children_per_expansion);
  v.rollouts_per_simulation = j.value("rollouts_per_simulation", v.rollouts_per_simulation);
  v.sc_alpha = j.value("sc_alpha", v.sc_alpha);
  v.beam_width = j.value("beam_width", v.beam_width);
  v.pre_expansion_layers = j.value("pre_expansion_layers", v.pre_expansion_layers);
  v.step_budget = j.value("step_budget", v.step_budget);
  v.max_depth = j.value("max_depth", v.max_depth);
  v.tool_verification = j.value("tool_verification", v.tool_verification);
  v.rng_seed = j.value("rng_seed", v.rng_seed);
  if (j.contains("tool_penalty")) v.tool_penalty = enum_from(j.at("tool_penalty"), kPenalties);
  v.tool_blocks_expansion = j.value("tool_blocks_expansion", v.tool_blocks_expansion);
  if (j.contains("answer_source")) v.answer_source = enum_from(j.at("answer_source"), kSources);
  if (j.contains("beam_scoring")) v.beam_scoring = enum_from(j.at("beam_scoring"), kBeamScoring);
  v.time_limit_ms = j.value("time_limit_ms", v.time_limit_ms);
  v.rollout_threads = j.value("rollout_threads", v.rollout_threads);
}

void to_json(json& j, const RewardScore& v) {
  j = json{{"p_yes", v.p_yes},
           {"p_no", v.p_no},
           {"normalized_yes", v.normalized_yes},
           {"normalized_no", v.normalized_no}};
}

void from_json(const json& j, RewardScore& v) {
  j.at("p_yes").get_to(v.p_yes);
  j.at("p_no").get_to(v.p_no);
  j.at("normalized_yes").get_to(v.normalized_yes);
  j.at("normalized_no").get_to(v.normalized_no);
}

void to_json(json& j, const LabeledEntry& v) {
  j = json{{"problem", v.problem}, {"solution", v.solution}};
}

void from_json(const json& j, LabeledEntry& v) {
  j.at("problem").get_to(v.problem);
  j.at("solution").get_to(v.solution);
}

void to_json(json& j, const LabeledDataset& v) {
  j = json{{"kind", enum_name(v.kind, kKinds)}, {"entries", v.entries}};
}

void from_json(const json& j, LabeledDataset& v) {
  v.kind = enum_from(j.at("kind"), kKinds);
  j.at("entries").get_to(v.entries);
}

void to_json(json& j, const PreferencePair& v) {
  j = json{{"problem", v.problem}, {"positive", v.positive}, {"negative", v.negative}};
}

void from_json(const json& j, PreferencePair& v) {
  j.at("problem").get_to(v.problem);
  j.at("positive").get_to(v.positive);
  j.at("negative").get_to(v.negative);
}

void to_json(json& j, const TraceEvent& v) {
  j = json{{"timestamp", v.timestamp},
           {"tree_id", v.tree_id},
           {"event", enum_name(v.event, kEvents)},
           {"payload", v.payload}};
}

void from_json(const json& j, TraceEvent& v) {
  j.at("timestamp").get_to(v.timestamp);
  j.at("tree_id").get_to(v.tree_id);
  v.event = enum_from(j.at("event"), kEvents);
  v.payload = j.value("payload", json::object());
}

std::vector<json> read_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::IoError, "cannot open " + path.string());
  std::vector<json> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      rows.push_back(json::parse(line));
    } catch (const json::exception& e) {
      throw Error(ErrorKind::ConfigError, path.string() + ":" +
                                              std::to_string(lineno) + ": " +
                                              e.what());
    }
  }
  return rows;
}

void write_jsonl(const std::filesystem::path& path, const std::vector<json>& rows) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::IoError, "cannot write " + path.string());
  for (const auto& row : rows) out << row.dump() << '\n';
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::IoError, "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::ConfigError, path.string() + ": " + e.what());
  }
}

void write_json_file(const std::filesystem::path& path, const json& value) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::IoError, "cannot write " + path.string());
  out << value.dump(2) << '\n';
}

}  // namespace stepsearch
