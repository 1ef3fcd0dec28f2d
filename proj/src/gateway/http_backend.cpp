#include "ropd/gateway/http_backend.hpp"

#include <cmath>
#include <cstdlib>

#include <httplib.h>

#include "ropd/error.hpp"

namespace ropd::gateway {

std::string api_key_for_role(Role role) {
  const std::string name = "ROPD_API_KEY_" + role_env_suffix(role);
  const char* value = std::getenv(name.c_str());
  return value != nullptr ? std::string(value) : std::string();
}

HttpChatBackend::ParsedEndpoint HttpChatBackend::parse_endpoint(
    const std::string& endpoint) {
  const std::size_t scheme_end = endpoint.find("://");
  if (scheme_end == std::string::npos) {
    throw Error(ErrorKind::ConfigError,
                "endpoint '" + endpoint + "' must start with http:// or https://");
  }
  const std::size_t path_start = endpoint.find('/', scheme_end + 3);
  ParsedEndpoint parsed;
  if (path_start == std::string::npos) {
    parsed.base = endpoint;
    parsed.path = "/v1";
  } else {
    parsed.base = endpoint.substr(0, path_start);
    parsed.path = endpoint.substr(path_start);
    while (parsed.path.size() > 1 && parsed.path.back() == '/') parsed.path.pop_back();
    if (parsed.path == "/") parsed.path.clear();
  }
  parsed.path += "/chat/completions";
  return parsed;
}

BackendReply HttpChatBackend::complete(const BackendHandle& handle,
                                       const ChatRequest& request, int sample_index) {
  (void)sample_index;  // sampling variation is the server's concern on the wire
  const ParsedEndpoint parsed = parse_endpoint(handle.endpoint);

  httplib::Client client(parsed.base);
  const auto timeout = std::chrono::duration<double>(handle.timeout_seconds);
  const auto seconds =
      std::chrono::duration_cast<std::chrono::milliseconds>(timeout);
  client.set_connection_timeout(seconds);
  client.set_read_timeout(seconds);
  client.set_write_timeout(seconds);

  httplib::Headers headers;
  const std::string key = api_key_for_role(handle.role);
  if (!key.empty()) headers.emplace("Authorization", "Bearer " + key);

  const std::string body = request_body_json(handle, request).dump();
  httplib::Result result = client.Post(parsed.path, headers, body, "application/json");

  if (!result) {
    throw Error(ErrorKind::Timeout,
                "transport failure talking to " + parsed.base + ": " +
                    httplib::to_string(result.error()));
  }
  if (result->status == 429) {
    throw Error(ErrorKind::RateLimited, "server returned 429 for " + parsed.path);
  }
  if (result->status < 200 || result->status >= 300) {
    throw Error(ErrorKind::BadStatus, "server returned status " +
                                          std::to_string(result->status) + " for " +
                                          parsed.path);
  }

  json reply;
  try {
    reply = json::parse(result->body);
  } catch (const json::exception&) {
    throw Error(ErrorKind::EmptyReply, "response body is not a chat-completions object");
  }
  if (!reply.contains("choices") || !reply["choices"].is_array() ||
      reply["choices"].empty()) {
    throw Error(ErrorKind::EmptyReply, "response carries no choices");
  }
  const json& message = reply["choices"][0].value("message", json::object());
  const std::string content = message.value("content", std::string());
  if (content.empty()) {
    throw Error(ErrorKind::EmptyReply, "response carries no message content");
  }

  BackendReply out;
  out.text = content;
  if (reply.contains("usage") && reply["usage"].is_object()) {
    TokenUsage usage;
    usage.prompt_tokens = reply["usage"].value("prompt_tokens", 0L);
    usage.completion_tokens = reply["usage"].value("completion_tokens", 0L);
    out.usage = usage;
  }
  return out;
}

}  // namespace ropd::gateway
