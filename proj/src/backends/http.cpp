#include "stepsearch/backends/http.hpp"

#include <cmath>
#include <cstdlib>
#include <thread>

#include <httplib.h>

#include "stepsearch/backends/prompts.hpp"
#include "stepsearch/core/error.hpp"
#include "stepsearch/textops/format.hpp"

namespace stepsearch::backends {

using nlohmann::json;

std::vector<std::string> validate(const HttpBackendConfig& c) {
  std::vector<std::string> out;
  if (c.base_url.rfind("http://", 0) != 0) out.push_back("base_url must start with http://");
  if (c.model.empty()) out.push_back("model must be set");
  if (!(c.temperature >= 0.0)) out.push_back("temperature must be >= 0");
  if (!(c.top_p > 0.0 && c.top_p <= 1.0)) out.push_back("top_p must lie in (0,1]");
  if (c.request_timeout_ms < 1) out.push_back("request_timeout_ms must be >= 1");
  if (c.max_retries < 1) out.push_back("max_retries must be >= 1");
  if (c.concurrency_limit < 1) out.push_back("concurrency_limit must be >= 1");
  if (c.max_tokens < 1) out.push_back("max_tokens must be >= 1");
  if (c.top_logprobs < 1) out.push_back("top_logprobs must be >= 1");
  return out;
}

void to_json(json& j, const HttpBackendConfig& v) {
  j = json{{"base_url", v.base_url},
           {"model", v.model},
           {"temperature", v.temperature},
           {"top_p", v.top_p},
           {"request_timeout_ms", v.request_timeout_ms},
           {"max_retries", v.max_retries},
           {"concurrency_limit", v.concurrency_limit},
           {"api_key_env", v.api_key_env},
           {"max_tokens", v.max_tokens},
           {"top_logprobs", v.top_logprobs},
           {"backoff_ms", v.backoff_ms}};
}

void from_json(const json& j, HttpBackendConfig& v) {
  v.base_url = j.value("base_url", v.base_url);
  v.model = j.value("model", v.model);
  v.temperature = j.value("temperature", v.temperature);
  v.top_p = j.value("top_p", v.top_p);
  v.request_timeout_ms = j.value("request_timeout_ms", v.request_timeout_ms);
  v.max_retries = j.value("max_retries", v.max_retries);
  v.concurrency_limit = j.value("concurrency_limit", v.concurrency_limit);
  v.api_key_env = j.value("api_key_env", v.api_key_env);
  v.max_tokens = j.value("max_tokens", v.max_tokens);
  v.top_logprobs = j.value("top_logprobs", v.top_logprobs);
  v.backoff_ms = j.value("backoff_ms", v.backoff_ms);
}

struct ChatClient::Impl {
  explicit Impl(int limit) : slots(limit) {}

  std::string host;  // scheme://host:port
  std::string path;  // base path + /v1/chat/completions
  std::string token;
  std::counting_semaphore<1 << 16> slots;
};

ChatClient::ChatClient(HttpBackendConfig config) : config_(std::move(config)) {
  if (auto problems = validate(config_); !problems.empty()) {
    throw Error(ErrorKind::ConfigError, "http backend: " + problems.front());
  }
  impl_ = std::make_unique<Impl>(config_.concurrency_limit);
  std::string url = config_.base_url;
  while (!url.empty() && url.back() == '/') url.pop_back();
  const auto path_start = url.find('/', std::string("http://").size());
  impl_->host = url.substr(0, path_start);
  impl_->path = (path_start == std::string::npos ? "" : url.substr(path_start)) +
                "/v1/chat/completions";
  if (const char* token = std::getenv(config_.api_key_env.c_str())) impl_->token = token;
}

ChatClient::~ChatClient() = default;

json ChatClient::complete(const json& request) {
  struct SlotGuard {
    explicit SlotGuard(std::counting_semaphore<1 << 16>& s) : sem(s) { sem.acquire(); }
    ~SlotGuard() { sem.release(); }
    std::counting_semaphore<1 << 16>& sem;
  } guard(impl_->slots);

  httplib::Headers headers;
  if (!impl_->token.empty()) headers.emplace("Authorization", "Bearer " + impl_->token);
  const std::string body = request.dump();
  std::string last_error;
  int backoff = config_.backoff_ms;

  for (int attempt = 1; attempt <= config_.max_retries; ++attempt) {
    httplib::Client client(impl_->host);
    const auto timeout = std::chrono::milliseconds(config_.request_timeout_ms);
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);

    auto res = client.Post(impl_->path, headers, body, "application/json");
    if (!res) {
      last_error = "request failed: " + httplib::to_string(res.error());
    } else if (res->status == 200) {
      try {
        return json::parse(res->body);
      } catch (const json::exception& e) {
        throw Error(ErrorKind::BackendUnavailable, std::string("unparseable response: ") + e.what());
      }
    } else if (res->status == 429 || res->status >= 500) {
      last_error = "server returned " + std::to_string(res->status);
    } else {
      throw Error(ErrorKind::BackendUnavailable,
                  "server rejected request with " + std::to_string(res->status) + ": " + res->body);
    }
    if (attempt < config_.max_retries) {
      std::this_thread::sleep_for(std::chrono::milliseconds(backoff));
      backoff *= 2;
    }
  }
  throw Error(ErrorKind::BackendUnavailable,
              last_error + " after " + std::to_string(config_.max_retries) + " attempts");
}

HttpPolicy::HttpPolicy(std::shared_ptr<ChatClient> client) : client_(std::move(client)) {}

PolicyCapabilities HttpPolicy::capabilities() const {
  return {true, true, batch_supported_ ? 16 : 1};
}

json HttpPolicy::build_request(const SolutionPrefix& prefix, int n, bool single_step) const {
  const auto& cfg = client_->config();
  std::string so_far = prefix.text();
  if (!so_far.empty()) so_far += "\n\n";
  json request = {
      {"model", cfg.model},
      {"messages",
       json::array({{{"role", "user"}, {"content", render_policy_prompt(prefix.problem)}},
                    {{"role", "assistant"}, {"content", so_far}}})},
      {"temperature", cfg.temperature},
      {"top_p", cfg.top_p},
      {"max_tokens", cfg.max_tokens},
      {"logprobs", false},
      // Continue the assistant turn instead of opening a new one.
      {"continue_final_message", true},
      {"add_generation_prompt", false},
  };
  if (n > 1) request["n"] = n;
  if (single_step) request["stop"] = json::array({"\n\n**Step"});
  return request;
}

std::vector<std::string> HttpPolicy::sample(const SolutionPrefix& prefix, int n, bool single_step) {
  std::vector<std::string> texts;
  auto collect = [&texts](const json& response) {
    for (const auto& choice : response.at("choices")) {
      texts.push_back(choice.at("message").at("content").get<std::string>());
    }
  };
  try {
    if (n > 1 && batch_supported_) {
      collect(client_->complete(build_request(prefix, n, single_step)));
      if (static_cast<int>(texts.size()) < n) batch_supported_ = false;
    }
    while (static_cast<int>(texts.size()) < n) {
      collect(client_->complete(build_request(prefix, 1, single_step)));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::FormatError, std::string("malformed completion response: ") + e.what());
  }
  texts.resize(static_cast<std::size_t>(n));
  return texts;
}

namespace {

// One generated step, or the final-answer block turned into a closing step.
std::optional<Step> step_from_generation(const std::string& text, int index) {
  CandidateSolution parsed;
  try {
    parsed = textops::parse_solution(text);
  } catch (const Error&) {
    return std::nullopt;
  }
  if (parsed.steps.empty()) {
    if (!parsed.final_answer) return std::nullopt;
    return Step{index, "Final Answer", "\\boxed{" + *parsed.final_answer + "}"};
  }
  Step step = parsed.steps.front();
  if (step.index != index) return std::nullopt;
  if (parsed.final_answer && !textops::has_final_answer(step.body)) {
    step.body += "\n\n\\boxed{" + *parsed.final_answer + "}";
  }
  return step;
}

}  // namespace

std::vector<Step> HttpPolicy::propose_steps(const SolutionPrefix& prefix, int k) {
  const int index = static_cast<int>(prefix.steps.size()) + 1;
  std::vector<Step> out;
  // One regeneration round for unparseable samples before failing.
  for (int round = 0; round < 2 && static_cast<int>(out.size()) < k; ++round) {
    for (const auto& text : sample(prefix, k - static_cast<int>(out.size()), true)) {
      if (auto step = step_from_generation(text, index)) out.push_back(std::move(*step));
    }
  }
  if (static_cast<int>(out.size()) < k) {
    throw Error(ErrorKind::FormatError, "policy produced unparseable steps after one retry");
  }
  return out;
}

CandidateSolution HttpPolicy::complete(const SolutionPrefix& prefix) {
  std::string so_far = prefix.text();
  if (!so_far.empty()) so_far += "\n\n";
  for (int round = 0; round < 2; ++round) {
    const auto text = so_far + sample(prefix, 1, false).front();
    try {
      auto parsed = textops::parse_solution(text);
      if (parsed.steps.size() > prefix.steps.size() + kMaxRolloutSteps) {
        throw Error(ErrorKind::NonTerminating,
                    "rollout generated " + std::to_string(parsed.steps.size() - prefix.steps.size()) +
                        " steps");
      }
      if (!parsed.final_answer) continue;
      parsed.problem_id = prefix.problem.id;
      return parsed;
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::NonTerminating) throw;
    }
  }
  throw Error(ErrorKind::FormatError, "rollout without a final answer after one retry");
}

std::unique_ptr<PolicyBackend> HttpPolicy::fork(std::uint64_t) const {
  return std::make_unique<HttpPolicy>(client_);
}

HttpReward::HttpReward(std::shared_ptr<ChatClient> client) : client_(std::move(client)) {}

json HttpReward::build_request(const Problem& problem, const CandidateSolution& solution) const {
  const auto& cfg = client_->config();
  return {
      {"model", cfg.model},
      {"messages", json::array({{{"role", "user"}, {"content", render_rm_prompt(problem, solution)}}})},
      {"temperature", 0.0},
      {"top_p", 1.0},
      {"max_tokens", 1},
      {"logprobs", true},
      {"top_logprobs", cfg.top_logprobs},
  };
}

std::pair<double, double> HttpReward::yes_no_probabilities(const Problem& problem,
                                                           const CandidateSolution& solution) {
  return yes_no_from_response(client_->complete(build_request(problem, solution)));
}

std::pair<double, double> yes_no_from_response(const json& response) {
  double p_yes = 0.0;
  double p_no = 0.0;
  bool seen = false;
  try {
    const auto& first = response.at("choices").at(0).at("logprobs").at("content").at(0);
    for (const auto& entry : first.at("top_logprobs")) {
      std::string token = entry.at("token").get<std::string>();
      const auto b = token.find_first_not_of(" \t\n\xC4\xA0\xE2\x96\x81");
      const auto e = token.find_last_not_of(" \t\n");
      token = b == std::string::npos ? "" : token.substr(b, e - b + 1);
      const double p = std::exp(entry.at("logprob").get<double>());
      if (token == "Yes") {
        p_yes += p;
        seen = true;
      } else if (token == "No") {
        p_no += p;
        seen = true;
      }
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::MissingProbabilities, std::string("no token log-probabilities: ") + e.what());
  }
  if (!seen) throw Error(ErrorKind::MissingProbabilities, "neither Yes nor No in top_logprobs");
  return {std::min(p_yes, 1.0), std::min(p_no, 1.0)};
}

}  // namespace stepsearch::backends
