#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "ropd/error.hpp"
#include "ropd/gateway/types.hpp"

namespace ropd::gateway {

// Single chat completion. Implementations throw Error with kinds
// RateLimited / Timeout / BadStatus / EmptyReply on failure; the gateway
// layers retries, caching, and rate limiting on top.
class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  virtual BackendReply complete(const BackendHandle& handle, const ChatRequest& request,
                                int sample_index) = 0;
};

// Deterministic offline backend. Replies are a pure function of
// (seed, request, sample_index); repeated calls are byte-identical.
class MockChatBackend : public ChatBackend {
 public:
  using ReplyFn = std::function<std::string(const BackendHandle&, const ChatRequest&,
                                            int sample_index, std::uint64_t seed)>;

  explicit MockChatBackend(std::uint64_t seed = 0);
  MockChatBackend(std::uint64_t seed, ReplyFn reply_fn);

  // Each distinct request digest fails this many times before succeeding.
  void fail_first_attempts(int count, ErrorKind kind = ErrorKind::Timeout);

  BackendReply complete(const BackendHandle& handle, const ChatRequest& request,
                        int sample_index) override;

  int total_calls() const;

 private:
  std::uint64_t seed_;
  ReplyFn reply_fn_;
  int fail_count_ = 0;
  ErrorKind fail_kind_ = ErrorKind::Timeout;
  mutable std::mutex mutex_;
  std::map<std::string, int> attempts_;
  int total_calls_ = 0;
};

// Canned-reply backend for fixtures. Rules are checked in order; the first
// rule whose `contains` strings all appear in the flattened request text
// (and whose sample_index matches, when set) supplies the reply.
class ReplayBackend : public ChatBackend {
 public:
  struct Rule {
    std::vector<std::string> contains;
    int sample_index = -1;  // -1 matches any index
    std::string reply;
  };

  ReplayBackend() = default;
  explicit ReplayBackend(std::vector<Rule> rules);

  // One JSON object per line: {"contains": [...], "reply": "...",
  // "sample_index": 0}. "sample_index" is optional.
  static std::vector<Rule> rules_from_jsonl(const std::string& path);

  void add_rule(Rule rule);

  BackendReply complete(const BackendHandle& handle, const ChatRequest& request,
                        int sample_index) override;

  int total_calls() const;

 private:
  std::vector<Rule> rules_;
  mutable std::mutex mutex_;
  int total_calls_ = 0;
};

}  // namespace ropd::gateway
