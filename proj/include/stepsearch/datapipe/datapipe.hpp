#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "stepsearch/backends/backend.hpp"
#include "stepsearch/core/types.hpp"

namespace stepsearch::datapipe {

struct DedupConfig {
  int ngram_n = 4;
  double overlap_threshold = 0.7;
};

std::vector<std::string> validate(const DedupConfig& config);
void to_json(nlohmann::json& j, const DedupConfig& v);
void from_json(const nlohmann::json& j, DedupConfig& v);

// Lowercased whitespace tokens grouped into n-grams. A text shorter than n
// tokens contributes a single gram of all its tokens.
std::vector<std::string> ngrams(const std::string& text, int n);

// |A ∩ B| / |A ∪ B| over n-gram sets; two empty sets count as identical.
double jaccard(const std::string& a, const std::string& b, int n);

// Throws Error(UnknownProblem) or Error(ConfigError) for a problem without
// a ground truth.
LabeledDataset label_solutions(const std::vector<Problem>& problems,
                               const std::vector<CandidateSolution>& solutions);

// Greedy scan keeping a solution unless its similarity to any kept one
// exceeds the threshold. Compares raw_text.
std::vector<CandidateSolution> dedup(const std::vector<CandidateSolution>& solutions,
                                     const DedupConfig& config);
LabeledDataset dedup(const LabeledDataset& dataset, const DedupConfig& config);

// Per problem, m = min(#Correct, #Incorrect) of each label sampled with a
// seed derived from (seed, problem id); input order is kept.
LabeledDataset debias(const LabeledDataset& dataset, std::uint64_t seed);

// Scores every solution (stored in rm_score). Up to `threads` requests in
// flight; results do not depend on completion order.
void score_all(std::vector<CandidateSolution>& solutions, const std::vector<Problem>& problems,
               backends::RewardBackend& reward, int threads = 1);

// Top top_m of each label per problem by descending score (ties to the
// smaller id), then dedup, then both lists truncated to equal length.
LabeledDataset active_select(const LabeledDataset& original, backends::RewardBackend& reward,
                             int top_m, const DedupConfig& dedup_config = {});

// True when the solution fails the rule filter: non-UTF-8 or control bytes,
// unparseable text, or no final answer.
bool is_garbled(const CandidateSolution& solution);

// One (highest-scored Correct, highest-scored Incorrect) pair per problem
// that has both after filtering, in problem order.
std::vector<PreferencePair> build_preference_pairs(const std::vector<Problem>& problems,
                                                   const std::vector<CandidateSolution>& solutions,
                                                   backends::RewardBackend& reward);

double log_sigmoid(double x);
double sigmoid(double x);

double dpo_loss(double logp_pos, double logp_neg, double ref_logp_pos, double ref_logp_neg,
                double beta);

struct DiscriminativeLosses {
  double l1 = 0.0;  // -(log σ(y+) + log(1 - σ(y-)))
  double l2 = 0.0;  // σ(y+) - σ(y-)
  double l3 = 0.0;  // (σ(y+) - 1)^2 + σ(y-)^2
  double l4 = 0.0;  // -log σ(y+ - y-)
};

DiscriminativeLosses discriminative_losses(double y_pos, double y_neg);

class RewardTrainer {
 public:
  virtual ~RewardTrainer() = default;
  virtual std::string name() const = 0;
  virtual std::shared_ptr<backends::RewardBackend> train(
      std::shared_ptr<backends::RewardBackend> current, const LabeledDataset& data) = 0;
};

class PolicyTrainer {
 public:
  virtual ~PolicyTrainer() = default;
  virtual std::string name() const = 0;
  virtual std::shared_ptr<backends::PolicyBackend> train(
      std::shared_ptr<backends::PolicyBackend> current, const std::vector<PreferencePair>& pairs) = 0;
};

class IdentityRewardTrainer : public RewardTrainer {
 public:
  std::string name() const override { return "identity"; }
  std::shared_ptr<backends::RewardBackend> train(std::shared_ptr<backends::RewardBackend> current,
                                                 const LabeledDataset&) override {
    return current;
  }
};

class IdentityPolicyTrainer : public PolicyTrainer {
 public:
  std::string name() const override { return "identity"; }
  std::shared_ptr<backends::PolicyBackend> train(std::shared_ptr<backends::PolicyBackend> current,
                                                 const std::vector<PreferencePair>&) override {
    return current;
  }
};

// Returns a fixed backend regardless of data, e.g. to swap in an oracle.
class ReplacementRewardTrainer : public RewardTrainer {
 public:
  explicit ReplacementRewardTrainer(std::shared_ptr<backends::RewardBackend> next)
      : next_(std::move(next)) {}
  std::string name() const override { return "replacement"; }
  std::shared_ptr<backends::RewardBackend> train(std::shared_ptr<backends::RewardBackend>,
                                                 const LabeledDataset&) override {
    return next_;
  }

 private:
  std::shared_ptr<backends::RewardBackend> next_;
};

struct RoundConfig {
  int candidates_per_problem = 8;
  DedupConfig dedup;
  bool active_learning = false;
  int top_m = 4;
  std::uint64_t seed = 0;
  int score_threads = 1;
};

void to_json(nlohmann::json& j, const RoundConfig& v);
void from_json(const nlohmann::json& j, RoundConfig& v);

// Complete solutions sampled from the empty prefix, ids "<problem>/cNNNN".
std::vector<CandidateSolution> generate_candidates(const std::vector<Problem>& problems,
                                                   backends::PolicyBackend& policy, int per_problem,
                                                   std::uint64_t seed);

struct RoundResult {
  std::shared_ptr<backends::PolicyBackend> policy;
  std::shared_ptr<backends::RewardBackend> reward;
  LabeledDataset original;
  LabeledDataset cleaned;
  std::optional<LabeledDataset> active;
  std::vector<PreferencePair> pairs;
  nlohmann::json report;
};

// generate -> label -> D_O, D_T (and D_A) -> reward trainer -> rescore with
// the new reward -> preference pairs -> policy trainer.
RoundResult iterate_round(std::shared_ptr<backends::PolicyBackend> policy,
                          std::shared_ptr<backends::RewardBackend> reward,
                          const std::vector<Problem>& problems, RewardTrainer& reward_trainer,
                          PolicyTrainer& policy_trainer, const RoundConfig& config);

// Kind, seed, config, entry count and per-label counts, plus a content hash
// of every source file.
nlohmann::json dataset_manifest(const LabeledDataset& dataset, std::uint64_t seed,
                                const nlohmann::json& config,
                                const std::vector<std::filesystem::path>& sources);

std::string file_hash(const std::filesystem::path& path);

}  // namespace stepsearch::datapipe
