#pragma once

#include <string>

#include "ropd/gateway/backend.hpp"

namespace ropd::gateway {

// OpenAI-compatible chat-completions client. The handle's endpoint is
// "scheme://host[:port][/prefix]"; requests POST to <prefix>/chat/completions
// ("/v1" when the endpoint has no path). Bearer token comes from the
// ROPD_API_KEY_<ROLE> environment variable and is never logged.
class HttpChatBackend : public ChatBackend {
 public:
  HttpChatBackend() = default;

  BackendReply complete(const BackendHandle& handle, const ChatRequest& request,
                        int sample_index) override;

  struct ParsedEndpoint {
    std::string base;  // scheme://host[:port]
    std::string path;  // request path including /chat/completions
  };
  static ParsedEndpoint parse_endpoint(const std::string& endpoint);
};

// API key for a role, read from the environment. Empty when unset.
std::string api_key_for_role(Role role);

}  // namespace ropd::gateway
