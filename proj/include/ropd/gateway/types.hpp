#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace ropd::gateway {

using json = nlohmann::json;

enum class Role { Teacher, Rubricator, Verifier, StudentService };

const char* to_string(Role role);
Role role_from_string(const std::string& name);

// Table of role-default sampling temperatures; the teacher default is 0.0
// even though distinct samples are expected (mock backends vary by
// sample_index regardless of temperature).
double default_temperature(Role role);

// Env var suffix for per-role API keys: ROPD_API_KEY_<suffix>.
std::string role_env_suffix(Role role);

struct ChatMessage {
  std::string role;  // "system" | "user" | "assistant"
  std::string content;

  bool operator==(const ChatMessage&) const = default;
};

struct ChatRequest {
  std::vector<ChatMessage> messages;
  // Unset fields inherit from the BackendHandle at call time.
  std::optional<double> temperature;
  std::optional<double> top_p;
  std::optional<int> max_tokens;

  bool empty() const { return messages.empty(); }
  bool operator==(const ChatRequest&) const = default;
};

struct BackendHandle {
  Role role = Role::Teacher;
  std::string endpoint;  // URL for wire backends, free-form tag for mocks
  std::string model_name;
  double temperature = 0.0;
  double top_p = 1.0;
  int max_tokens = 4096;
  double rate_limit = 0.0;  // requests per second, 0 disables limiting
  double timeout_seconds = 60.0;
  int max_inflight = 4;
};

BackendHandle make_handle(Role role, std::string endpoint, std::string model_name);

struct TokenUsage {
  long prompt_tokens = 0;
  long completion_tokens = 0;
};

struct BackendReply {
  std::string text;
  std::optional<TokenUsage> usage;
};

struct CallRecord {
  std::string request_hash;
  std::string reply_text;
  double latency_seconds = 0.0;
  int attempt_count = 1;
  bool from_cache = false;
  std::optional<TokenUsage> token_usage;
};

// Effective sampling parameters after filling request fields from the handle.
struct SamplingParams {
  double temperature;
  double top_p;
  int max_tokens;
};

SamplingParams effective_params(const BackendHandle& handle, const ChatRequest& request);

// Canonical digest over (role, model, messages, sampling params, sample_index).
// Identical inputs map to identical digests across runs and platforms.
std::string request_digest(const BackendHandle& handle, const ChatRequest& request,
                           int sample_index);

json request_body_json(const BackendHandle& handle, const ChatRequest& request);

}  // namespace ropd::gateway
