#include "ropd/gateway/backend.hpp"

#include <sstream>

#include "ropd/util/digest.hpp"
#include "ropd/util/jsonl.hpp"

namespace ropd::gateway {

const char* to_string(Role role) {
  switch (role) {
    case Role::Teacher: return "Teacher";
    case Role::Rubricator: return "Rubricator";
    case Role::Verifier: return "Verifier";
    case Role::StudentService: return "StudentService";
  }
  return "Teacher";
}

Role role_from_string(const std::string& name) {
  if (name == "Teacher") return Role::Teacher;
  if (name == "Rubricator") return Role::Rubricator;
  if (name == "Verifier") return Role::Verifier;
  if (name == "StudentService") return Role::StudentService;
  throw Error(ErrorKind::ConfigError, "unknown role '" + name + "'");
}

double default_temperature(Role role) {
  switch (role) {
    case Role::Teacher: return 0.0;
    case Role::Rubricator: return 0.7;
    case Role::Verifier: return 0.0;
    case Role::StudentService: return 1.0;
  }
  return 0.0;
}

std::string role_env_suffix(Role role) {
  switch (role) {
    case Role::Teacher: return "TEACHER";
    case Role::Rubricator: return "RUBRICATOR";
    case Role::Verifier: return "VERIFIER";
    case Role::StudentService: return "STUDENT_SERVICE";
  }
  return "TEACHER";
}

BackendHandle make_handle(Role role, std::string endpoint, std::string model_name) {
  BackendHandle handle;
  handle.role = role;
  handle.endpoint = std::move(endpoint);
  handle.model_name = std::move(model_name);
  handle.temperature = default_temperature(role);
  return handle;
}

SamplingParams effective_params(const BackendHandle& handle, const ChatRequest& request) {
  return {request.temperature.value_or(handle.temperature),
          request.top_p.value_or(handle.top_p),
          request.max_tokens.value_or(handle.max_tokens)};
}

json request_body_json(const BackendHandle& handle, const ChatRequest& request) {
  const SamplingParams p = effective_params(handle, request);
  json messages = json::array();
  for (const ChatMessage& m : request.messages) {
    messages.push_back({{"role", m.role}, {"content", m.content}});
  }
  return {{"model", handle.model_name},
          {"messages", std::move(messages)},
          {"temperature", p.temperature},
          {"top_p", p.top_p},
          {"max_tokens", p.max_tokens}};
}

std::string request_digest(const BackendHandle& handle, const ChatRequest& request,
                           int sample_index) {
  // The body dump already covers model name, messages, and sampling params;
  // role and sample_index are framed separately so ablation runs and
  // per-index samples never collide in the cache.
  return util::sha256_hex({std::string(to_string(handle.role)),
                           request_body_json(handle, request).dump(),
                           std::to_string(sample_index)});
}

MockChatBackend::MockChatBackend(std::uint64_t seed) : seed_(seed) {}

MockChatBackend::MockChatBackend(std::uint64_t seed, ReplyFn reply_fn)
    : seed_(seed), reply_fn_(std::move(reply_fn)) {}

void MockChatBackend::fail_first_attempts(int count, ErrorKind kind) {
  std::lock_guard<std::mutex> lock(mutex_);
  fail_count_ = count;
  fail_kind_ = kind;
}

BackendReply MockChatBackend::complete(const BackendHandle& handle,
                                       const ChatRequest& request, int sample_index) {
  const std::string digest = request_digest(handle, request, sample_index);
  {
    std::lock_guard<std::mutex> lock(mutex_);
    ++total_calls_;
    int& seen = attempts_[digest];
    ++seen;
    if (seen <= fail_count_) {
      throw Error(fail_kind_, std::string("injected mock failure, attempt ") +
                                  std::to_string(seen));
    }
  }
  if (reply_fn_) return {reply_fn_(handle, request, sample_index, seed_), std::nullopt};
  std::ostringstream out;
  out << "mock(" << to_string(handle.role) << ") sample=" << sample_index
      << " id=" << util::sha256_hex({std::to_string(seed_), digest}).substr(0, 16);
  return {out.str(), std::nullopt};
}

int MockChatBackend::total_calls() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return total_calls_;
}

ReplayBackend::ReplayBackend(std::vector<Rule> rules) : rules_(std::move(rules)) {}

std::vector<ReplayBackend::Rule> ReplayBackend::rules_from_jsonl(const std::string& path) {
  std::vector<Rule> rules;
  util::for_each_jsonl_record(path, [&](std::size_t, const json& record) {
    Rule rule;
    if (record.contains("contains")) {
      for (const json& s : record.at("contains")) rule.contains.push_back(s.get<std::string>());
    }
    rule.sample_index = record.value("sample_index", -1);
    rule.reply = record.at("reply").get<std::string>();
    rules.push_back(std::move(rule));
  });
  return rules;
}

void ReplayBackend::add_rule(Rule rule) { rules_.push_back(std::move(rule)); }

BackendReply ReplayBackend::complete(const BackendHandle& handle,
                                     const ChatRequest& request, int sample_index) {
  {
    std::lock_guard<std::mutex> lock(mutex_);
    ++total_calls_;
  }
  std::string haystack;
  for (const ChatMessage& m : request.messages) {
    haystack += m.content;
    haystack += '\n';
  }
  for (const Rule& rule : rules_) {
    if (rule.sample_index >= 0 && rule.sample_index != sample_index) continue;
    bool all = true;
    for (const std::string& needle : rule.contains) {
      if (haystack.find(needle) == std::string::npos) {
        all = false;
        break;
      }
    }
    if (all) return {rule.reply, std::nullopt};
  }
  throw Error(ErrorKind::EmptyReply,
              std::string("no replay rule matches request for role ") +
                  to_string(handle.role));
}

int ReplayBackend::total_calls() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return total_calls_;
}

}  // namespace ropd::gateway
