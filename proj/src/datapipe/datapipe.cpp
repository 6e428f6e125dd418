#include "stepsearch/datapipe/datapipe.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <future>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_map>

#include "stepsearch/core/answer.hpp"
#include "stepsearch/core/error.hpp"
#include "stepsearch/core/json_io.hpp"
#include "stepsearch/core/rng.hpp"
#include "stepsearch/textops/format.hpp"

namespace stepsearch::datapipe {

using nlohmann::json;

std::vector<std::string> validate(const DedupConfig& c) {
  std::vector<std::string> out;
  if (c.ngram_n < 1) out.push_back("ngram_n must be >= 1");
  if (!(c.overlap_threshold >= 0.0 && c.overlap_threshold <= 1.0)) {
    out.push_back("overlap_threshold must lie in [0,1]");
  }
  return out;
}

void to_json(json& j, const DedupConfig& v) {
  j = json{{"ngram_n", v.ngram_n}, {"overlap_threshold", v.overlap_threshold}, {"similarity", "jaccard"}};
}

void from_json(const json& j, DedupConfig& v) {
  v.ngram_n = j.value("ngram_n", v.ngram_n);
  v.overlap_threshold = j.value("overlap_threshold", v.overlap_threshold);
  if (j.value("similarity", std::string("jaccard")) != "jaccard") {
    throw Error(ErrorKind::ConfigError, "only jaccard similarity is supported");
  }
}

std::vector<std::string> ngrams(const std::string& text, int n) {
  std::vector<std::string> tokens;
  std::istringstream in(text);
  for (std::string tok; in >> tok;) {
    std::transform(tok.begin(), tok.end(), tok.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    tokens.push_back(std::move(tok));
  }
  std::vector<std::string> out;
  if (tokens.empty()) return out;
  const auto width = std::min<std::size_t>(static_cast<std::size_t>(std::max(n, 1)), tokens.size());
  for (std::size_t i = 0; i + width <= tokens.size(); ++i) {
    std::string gram = tokens[i];
    for (std::size_t j = 1; j < width; ++j) gram += ' ' + tokens[i + j];
    out.push_back(std::move(gram));
  }
  return out;
}

namespace {

using GramSet = std::set<std::string>;

GramSet gram_set(const std::string& text, int n) {
  auto grams = ngrams(text, n);
  return GramSet(grams.begin(), grams.end());
}

double jaccard_sets(const GramSet& a, const GramSet& b) {
  if (a.empty() && b.empty()) return 1.0;
  std::size_t common = 0;
  for (const auto& g : a) common += b.count(g);
  return static_cast<double>(common) / static_cast<double>(a.size() + b.size() - common);
}

std::map<std::string, const Problem*> index_problems(const std::vector<Problem>& problems) {
  std::map<std::string, const Problem*> out;
  for (const auto& p : problems) out.emplace(p.id, &p);
  return out;
}

const Problem& lookup(const std::map<std::string, const Problem*>& index, const std::string& id) {
  auto it = index.find(id);
  if (it == index.end()) throw Error(ErrorKind::UnknownProblem, "unknown problem id '" + id + "'");
  return *it->second;
}

// Problem ids in order of first appearance.
std::vector<std::string> problem_order(const LabeledDataset& d) {
  std::vector<std::string> order;
  std::set<std::string> seen;
  for (const auto& e : d.entries) {
    if (seen.insert(e.problem.id).second) order.push_back(e.problem.id);
  }
  return order;
}

bool ranked_before(const CandidateSolution& a, const CandidateSolution& b) {
  const double sa = a.rm_score.value_or(0.0);
  const double sb = b.rm_score.value_or(0.0);
  return sa != sb ? sa > sb : a.id < b.id;
}

}  // namespace

double jaccard(const std::string& a, const std::string& b, int n) {
  return jaccard_sets(gram_set(a, n), gram_set(b, n));
}

LabeledDataset label_solutions(const std::vector<Problem>& problems,
                               const std::vector<CandidateSolution>& solutions) {
  const auto index = index_problems(problems);
  LabeledDataset out;
  out.kind = DatasetKind::Original;
  for (const auto& s : solutions) {
    const Problem& p = lookup(index, s.problem_id);
    if (!p.ground_truth) {
      throw Error(ErrorKind::ConfigError, "problem '" + p.id + "' has no ground truth");
    }
    CandidateSolution labeled = s;
    labeled.label = s.final_answer && answers_match(*s.final_answer, *p.ground_truth)
                        ? Label::Correct
                        : Label::Incorrect;
    out.entries.push_back({p, std::move(labeled)});
  }
  return out;
}

std::vector<CandidateSolution> dedup(const std::vector<CandidateSolution>& solutions,
                                     const DedupConfig& config) {
  if (auto problems = validate(config); !problems.empty()) {
    throw Error(ErrorKind::ConfigError, "dedup: " + problems.front());
  }
  std::vector<CandidateSolution> kept;
  std::vector<GramSet> kept_grams;
  for (const auto& s : solutions) {
    auto grams = gram_set(s.raw_text, config.ngram_n);
    const bool similar = std::any_of(kept_grams.begin(), kept_grams.end(), [&](const GramSet& g) {
      return jaccard_sets(grams, g) > config.overlap_threshold;
    });
    if (similar) continue;
    kept.push_back(s);
    kept_grams.push_back(std::move(grams));
  }
  return kept;
}

LabeledDataset dedup(const LabeledDataset& dataset, const DedupConfig& config) {
  std::vector<CandidateSolution> solutions;
  for (const auto& e : dataset.entries) solutions.push_back(e.solution);
  const auto kept = dedup(solutions, config);
  LabeledDataset out{dataset.kind, {}};
  std::size_t k = 0;
  for (const auto& e : dataset.entries) {
    if (k < kept.size() && kept[k] == e.solution) {
      out.entries.push_back(e);
      ++k;
    }
  }
  return out;
}

LabeledDataset debias(const LabeledDataset& dataset, std::uint64_t seed) {
  std::map<std::string, std::pair<std::vector<std::size_t>, std::vector<std::size_t>>> by_problem;
  for (std::size_t i = 0; i < dataset.entries.size(); ++i) {
    const auto& e = dataset.entries[i];
    auto& [correct, incorrect] = by_problem[e.problem.id];
    if (e.solution.label == Label::Correct) correct.push_back(i);
    if (e.solution.label == Label::Incorrect) incorrect.push_back(i);
  }
  std::vector<bool> keep(dataset.entries.size(), false);
  for (auto& [id, split] : by_problem) {
    auto& [correct, incorrect] = split;
    const std::size_t m = std::min(correct.size(), incorrect.size());
    Rng rng(mix_seed(seed, fnv1a(id)));
    for (auto* group : {&correct, &incorrect}) {
      // Partial Fisher-Yates: the first m slots become a uniform sample.
      for (std::size_t i = 0; i < m; ++i) {
        const auto j = i + static_cast<std::size_t>(rng.below(group->size() - i));
        std::swap((*group)[i], (*group)[j]);
        keep[(*group)[i]] = true;
      }
    }
  }
  LabeledDataset out{DatasetKind::Cleaned, {}};
  for (std::size_t i = 0; i < dataset.entries.size(); ++i) {
    if (keep[i]) out.entries.push_back(dataset.entries[i]);
  }
  return out;
}

void score_all(std::vector<CandidateSolution>& solutions, const std::vector<Problem>& problems,
               backends::RewardBackend& reward, int threads) {
  const auto index = index_problems(problems);
  auto score_one = [&](CandidateSolution& s) {
    s.rm_score = backends::score_solution(reward, lookup(index, s.problem_id), s).normalized_yes;
  };
  if (threads <= 1) {
    for (auto& s : solutions) score_one(s);
    return;
  }
  for (std::size_t start = 0; start < solutions.size(); start += static_cast<std::size_t>(threads)) {
    std::vector<std::future<void>> wave;
    const auto end = std::min(solutions.size(), start + static_cast<std::size_t>(threads));
    for (std::size_t i = start; i < end; ++i) {
      wave.push_back(std::async(std::launch::async, [&, i] { score_one(solutions[i]); }));
    }
    for (auto& f : wave) f.get();
  }
}

LabeledDataset active_select(const LabeledDataset& original, backends::RewardBackend& reward,
                             int top_m, const DedupConfig& dedup_config) {
  if (top_m < 1) throw Error(ErrorKind::ConfigError, "top_m must be >= 1");
  std::map<std::string, Problem> problems;
  std::vector<CandidateSolution> scored;
  for (const auto& e : original.entries) {
    problems.emplace(e.problem.id, e.problem);
    scored.push_back(e.solution);
  }
  std::vector<Problem> problem_list;
  for (const auto& [id, p] : problems) problem_list.push_back(p);
  score_all(scored, problem_list, reward);

  LabeledDataset out{DatasetKind::ActiveLearning, {}};
  for (const auto& id : problem_order(original)) {
    std::vector<CandidateSolution> correct;
    std::vector<CandidateSolution> incorrect;
    for (const auto& s : scored) {
      if (s.problem_id != id) continue;
      if (s.label == Label::Correct) correct.push_back(s);
      if (s.label == Label::Incorrect) incorrect.push_back(s);
    }
    for (auto* split : {&correct, &incorrect}) {
      std::sort(split->begin(), split->end(), ranked_before);
      if (split->size() > static_cast<std::size_t>(top_m)) split->resize(static_cast<std::size_t>(top_m));
      *split = dedup(*split, dedup_config);
    }
    const std::size_t m = std::min(correct.size(), incorrect.size());
    for (std::size_t i = 0; i < m; ++i) out.entries.push_back({problems.at(id), correct[i]});
    for (std::size_t i = 0; i < m; ++i) out.entries.push_back({problems.at(id), incorrect[i]});
  }
  return out;
}

bool is_garbled(const CandidateSolution& s) {
  if (!textops::is_clean_text(s.raw_text)) return true;
  if (!s.raw_text.empty()) {
    try {
      const auto parsed = textops::parse_solution(s.raw_text);
      if (!parsed.final_answer) return true;
    } catch (const Error&) {
      return true;
    }
  }
  return !s.final_answer;
}

std::vector<PreferencePair> build_preference_pairs(const std::vector<Problem>& problems,
                                                   const std::vector<CandidateSolution>& solutions,
                                                   backends::RewardBackend& reward) {
  const auto index = index_problems(problems);
  std::vector<CandidateSolution> kept;
  for (const auto& s : solutions) {
    if (!is_garbled(s)) kept.push_back(s);
  }
  const auto labeled = label_solutions(problems, kept);

  std::vector<PreferencePair> pairs;
  for (const auto& p : problems) {
    std::vector<CandidateSolution> correct;
    std::vector<CandidateSolution> incorrect;
    for (const auto& e : labeled.entries) {
      if (e.problem.id != p.id) continue;
      (e.solution.label == Label::Correct ? correct : incorrect).push_back(e.solution);
    }
    if (correct.empty() || incorrect.empty()) continue;
    score_all(correct, problems, reward);
    score_all(incorrect, problems, reward);
    const auto pos = std::min_element(correct.begin(), correct.end(), ranked_before);
    const auto neg = std::min_element(incorrect.begin(), incorrect.end(), ranked_before);
    pairs.push_back({p, *pos, *neg});
  }
  return pairs;
}

double log_sigmoid(double x) { return x >= 0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x)); }

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double dpo_loss(double logp_pos, double logp_neg, double ref_logp_pos, double ref_logp_neg,
                double beta) {
  if (!(beta > 0.0)) throw Error(ErrorKind::ConfigError, "dpo beta must be > 0");
  return -log_sigmoid(beta * (logp_pos - ref_logp_pos) - beta * (logp_neg - ref_logp_neg));
}

DiscriminativeLosses discriminative_losses(double y_pos, double y_neg) {
  DiscriminativeLosses out;
  // log(1 - σ(y)) = log σ(-y), and σ(y) - 1 = -σ(-y).
  out.l1 = -(log_sigmoid(y_pos) + log_sigmoid(-y_neg));
  out.l2 = sigmoid(y_pos) - sigmoid(y_neg);
  const double miss = sigmoid(-y_pos);
  const double neg = sigmoid(y_neg);
  out.l3 = miss * miss + neg * neg;
  out.l4 = -log_sigmoid(y_pos - y_neg);
  return out;
}

void to_json(json& j, const RoundConfig& v) {
  json dedup_json;
  to_json(dedup_json, v.dedup);
  j = json{{"candidates_per_problem", v.candidates_per_problem},
           {"dedup", dedup_json},
           {"active_learning", v.active_learning},
           {"top_m", v.top_m},
           {"seed", v.seed},
           {"score_threads", v.score_threads}};
}

void from_json(const json& j, RoundConfig& v) {
  v.candidates_per_problem = j.value("candidates_per_problem", v.candidates_per_problem);
  if (j.contains("dedup")) from_json(j.at("dedup"), v.dedup);
  v.active_learning = j.value("active_learning", v.active_learning);
  v.top_m = j.value("top_m", v.top_m);
  v.seed = j.value("seed", v.seed);
  v.score_threads = j.value("score_threads", v.score_threads);
}

std::vector<CandidateSolution> generate_candidates(const std::vector<Problem>& problems,
                                                   backends::PolicyBackend& policy, int per_problem,
                                                   std::uint64_t seed) {
  if (per_problem < 1) throw Error(ErrorKind::ConfigError, "candidates_per_problem must be >= 1");
  std::vector<CandidateSolution> out;
  for (const auto& p : problems) {
    auto stream = policy.fork(mix_seed(seed, fnv1a(p.id)));
    backends::SolutionPrefix prefix;
    prefix.problem = p;
    for (int i = 0; i < per_problem; ++i) {
      auto s = backends::rollout(*stream, prefix);
      char buf[16];
      std::snprintf(buf, sizeof buf, "/c%04d", i);
      s.id = p.id + buf;
      out.push_back(std::move(s));
    }
  }
  return out;
}

namespace {

json label_counts(const LabeledDataset& d) {
  std::size_t correct = 0;
  std::size_t incorrect = 0;
  for (const auto& e : d.entries) {
    if (e.solution.label == Label::Correct) ++correct;
    if (e.solution.label == Label::Incorrect) ++incorrect;
  }
  return {{"entries", d.entries.size()},
          {"correct", correct},
          {"incorrect", incorrect},
          {"problems", problem_order(d).size()}};
}

json score_stats(const std::vector<CandidateSolution>& scored) {
  double sum_c = 0.0, sum_i = 0.0;
  std::size_t n_c = 0, n_i = 0;
  for (const auto& s : scored) {
    if (s.label == Label::Correct) {
      sum_c += s.rm_score.value_or(0.0);
      ++n_c;
    } else {
      sum_i += s.rm_score.value_or(0.0);
      ++n_i;
    }
  }
  return {{"mean_correct", n_c ? json(sum_c / static_cast<double>(n_c)) : json(nullptr)},
          {"mean_incorrect", n_i ? json(sum_i / static_cast<double>(n_i)) : json(nullptr)}};
}

}  // namespace

RoundResult iterate_round(std::shared_ptr<backends::PolicyBackend> policy,
                          std::shared_ptr<backends::RewardBackend> reward,
                          const std::vector<Problem>& problems, RewardTrainer& reward_trainer,
                          PolicyTrainer& policy_trainer, const RoundConfig& config) {
  RoundResult r;
  const auto candidates =
      generate_candidates(problems, *policy, config.candidates_per_problem, config.seed);
  r.original = label_solutions(problems, candidates);
  r.cleaned = debias(dedup(r.original, config.dedup), config.seed);
  if (config.active_learning) r.active = active_select(r.original, *reward, config.top_m, config.dedup);

  const LabeledDataset& rm_data = r.active ? *r.active : r.cleaned;
  r.reward = reward_trainer.train(reward, rm_data);

  std::vector<CandidateSolution> rescored;
  for (const auto& e : r.original.entries) rescored.push_back(e.solution);
  score_all(rescored, problems, *r.reward, config.score_threads);

  r.pairs = build_preference_pairs(problems, candidates, *r.reward);
  r.policy = policy_trainer.train(policy, r.pairs);

  json config_json;
  to_json(config_json, config);
  r.report = {{"config", config_json},
              {"candidates", candidates.size()},
              {"original", label_counts(r.original)},
              {"cleaned", label_counts(r.cleaned)},
              {"active", r.active ? label_counts(*r.active) : json(nullptr)},
              {"pairs", r.pairs.size()},
              {"reward_trainer", reward_trainer.name()},
              {"policy_trainer", policy_trainer.name()},
              {"scores", score_stats(rescored)}};
  return r;
}

std::string file_hash(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  char hex[17];
  std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(fnv1a(buf.str())));
  return std::string("fnv1a64:") + hex;
}

json dataset_manifest(const LabeledDataset& dataset, std::uint64_t seed, const json& config,
                      const std::vector<std::filesystem::path>& sources) {
  json hashes = json::object();
  for (const auto& s : sources) hashes[s.string()] = file_hash(s);
  return {{"kind", to_string(dataset.kind)},
          {"seed", seed},
          {"config", config},
          {"counts", label_counts(dataset)},
          {"sources", hashes}};
}

}  // namespace stepsearch::datapipe
