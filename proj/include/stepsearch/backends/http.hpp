#pragma once

// Client for OpenAI-compatible inference servers:
// POST {base_url}/v1/chat/completions.

#include <atomic>
#include <chrono>
#include <memory>
#include <semaphore>
#include <string>
#include <vector>

#include <json.hpp>

#include "stepsearch/backends/backend.hpp"

namespace stepsearch::backends {

struct HttpBackendConfig {
  std::string base_url = "http://127.0.0.1:8000";
  std::string model = "policy";
  double temperature = 0.7;
  double top_p = 0.95;
  int request_timeout_ms = 60000;
  int max_retries = 3;  // attempts per request
  int concurrency_limit = 4;
  std::string api_key_env = "STILL_API_KEY";
  int max_tokens = 1024;
  int top_logprobs = 20;
  int backoff_ms = 250;  // doubled after each failed attempt
};

std::vector<std::string> validate(const HttpBackendConfig& config);
void to_json(nlohmann::json& j, const HttpBackendConfig& v);
void from_json(const nlohmann::json& j, HttpBackendConfig& v);

class ChatClient {
 public:
  explicit ChatClient(HttpBackendConfig config);
  ~ChatClient();

  // Sends one request, retrying connection failures, timeouts, 429 and 5xx
  // with exponential backoff. Throws Error(BackendUnavailable) when attempts
  // run out or the server rejects the request.
  nlohmann::json complete(const nlohmann::json& request);

  const HttpBackendConfig& config() const { return config_; }

 private:
  struct Impl;
  HttpBackendConfig config_;
  std::unique_ptr<Impl> impl_;
};

class HttpPolicy : public PolicyBackend {
 public:
  explicit HttpPolicy(std::shared_ptr<ChatClient> client);

  PolicyCapabilities capabilities() const override;
  std::string name() const override { return "http:" + client_->config().model; }
  std::vector<Step> propose_steps(const SolutionPrefix& prefix, int k) override;
  CandidateSolution complete(const SolutionPrefix& prefix) override;
  std::unique_ptr<PolicyBackend> fork(std::uint64_t seed) const override;

  nlohmann::json build_request(const SolutionPrefix& prefix, int n, bool single_step) const;

 private:
  std::vector<std::string> sample(const SolutionPrefix& prefix, int n, bool single_step);
  std::shared_ptr<ChatClient> client_;
  std::atomic<bool> batch_supported_{true};
};

class HttpReward : public RewardBackend {
 public:
  explicit HttpReward(std::shared_ptr<ChatClient> client);

  RewardCapabilities capabilities() const override { return {true}; }
  std::string name() const override { return "http:" + client_->config().model; }
  std::pair<double, double> yes_no_probabilities(const Problem& problem,
                                                 const CandidateSolution& solution) override;

  nlohmann::json build_request(const Problem& problem, const CandidateSolution& solution) const;

 private:
  std::shared_ptr<ChatClient> client_;
};

// Yes/No probabilities from the first position's top_logprobs. Tokens are
// compared after trimming whitespace; several spellings of the same word add
// up. Throws Error(MissingProbabilities) when neither word is present.
std::pair<double, double> yes_no_from_response(const nlohmann::json& response);

}  // namespace stepsearch::backends
