#pragma once

#include <chrono>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ropd/error.hpp"
#include "ropd/gateway/backend.hpp"
#include "ropd/gateway/cache.hpp"
#include "ropd/gateway/types.hpp"

namespace ropd::gateway {

struct GatewayConfig {
  int max_retries = 4;  // transient-failure retries on top of the first attempt
  double backoff_base_seconds = 0.05;
  double backoff_max_seconds = 2.0;
  std::string cache_dir;  // empty disables caching
};

struct SampleFailure {
  int index = 0;
  ErrorKind kind = ErrorKind::BadStatus;
  std::string message;
};

// collect_samples failure carrying the successful subset.
class PartialFailureError : public Error {
 public:
  PartialFailureError(std::vector<std::optional<std::string>> replies,
                      std::vector<SampleFailure> failures);

  const std::vector<std::optional<std::string>>& replies() const { return replies_; }
  const std::vector<SampleFailure>& failures() const { return failures_; }

 private:
  std::vector<std::optional<std::string>> replies_;
  std::vector<SampleFailure> failures_;
};

// Blocking token bucket with burst capacity 1.
class RateLimiter {
 public:
  explicit RateLimiter(double per_second);
  void acquire();

 private:
  double per_second_;
  std::chrono::steady_clock::time_point next_slot_;
  std::mutex mutex_;
};

// Retries, rate limiting, and caching around a ChatBackend. Shareable across
// threads; per-handle limiter state is internally synchronized.
class Gateway {
 public:
  Gateway(std::shared_ptr<ChatBackend> backend, GatewayConfig config);

  // Fills unset request fields from the handle, consults the cache, then
  // calls the backend with exponential backoff on transient failures
  // (RateLimited, Timeout, BadStatus, EmptyReply).
  std::pair<std::string, CallRecord> chat(const BackendHandle& handle,
                                          const ChatRequest& request, int sample_index);

  // count replies ordered by sample_index, gathered with at most
  // handle.max_inflight concurrent calls. Throws PartialFailureError when
  // any index fails after retries.
  std::vector<std::string> collect_samples(const BackendHandle& handle,
                                           const ChatRequest& request, int count);

  ChatBackend& backend() { return *backend_; }
  bool cache_enabled() const { return cache_ != nullptr; }
  const ReplyCache* cache() const { return cache_.get(); }

 private:
  RateLimiter& limiter_for(const BackendHandle& handle);

  std::shared_ptr<ChatBackend> backend_;
  GatewayConfig config_;
  std::unique_ptr<ReplyCache> cache_;
  std::mutex limiters_mutex_;
  std::map<std::string, std::unique_ptr<RateLimiter>> limiters_;
};

}  // namespace ropd::gateway
