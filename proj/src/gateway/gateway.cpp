#include "ropd/gateway/gateway.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include "ropd/util/parallel.hpp"

namespace ropd::gateway {

namespace {

bool transient(ErrorKind kind) {
  return kind == ErrorKind::RateLimited || kind == ErrorKind::Timeout ||
         kind == ErrorKind::BadStatus || kind == ErrorKind::EmptyReply;
}

std::string summarize_failures(const std::vector<SampleFailure>& failures) {
  std::string msg = std::to_string(failures.size()) + " of the requested samples failed";
  if (!failures.empty()) {
    msg += " (first: index " + std::to_string(failures.front().index) + ", " +
           std::string(to_string(failures.front().kind)) + ": " +
           failures.front().message + ")";
  }
  return msg;
}

}  // namespace

PartialFailureError::PartialFailureError(std::vector<std::optional<std::string>> replies,
                                         std::vector<SampleFailure> failures)
    : Error(ErrorKind::PartialFailure, summarize_failures(failures)),
      replies_(std::move(replies)),
      failures_(std::move(failures)) {}

RateLimiter::RateLimiter(double per_second)
    : per_second_(per_second), next_slot_(std::chrono::steady_clock::now()) {}

void RateLimiter::acquire() {
  if (per_second_ <= 0.0) return;
  std::chrono::steady_clock::time_point wake;
  {
    std::lock_guard<std::mutex> lock(mutex_);
    const auto now = std::chrono::steady_clock::now();
    const auto interval =
        std::chrono::duration_cast<std::chrono::steady_clock::duration>(
            std::chrono::duration<double>(1.0 / per_second_));
    // Burst of 1: an idle limiter admits the next request immediately.
    wake = std::max(next_slot_, now);
    next_slot_ = wake + interval;
  }
  std::this_thread::sleep_until(wake);
}

Gateway::Gateway(std::shared_ptr<ChatBackend> backend, GatewayConfig config)
    : backend_(std::move(backend)), config_(std::move(config)) {
  if (!config_.cache_dir.empty()) {
    cache_ = std::make_unique<ReplyCache>(config_.cache_dir);
  }
}

RateLimiter& Gateway::limiter_for(const BackendHandle& handle) {
  const std::string key = std::string(to_string(handle.role)) + "|" + handle.endpoint +
                          "|" + handle.model_name;
  std::lock_guard<std::mutex> lock(limiters_mutex_);
  auto it = limiters_.find(key);
  if (it == limiters_.end()) {
    it = limiters_.emplace(key, std::make_unique<RateLimiter>(handle.rate_limit)).first;
  }
  return *it->second;
}

std::pair<std::string, CallRecord> Gateway::chat(const BackendHandle& handle,
                                                 const ChatRequest& request,
                                                 int sample_index) {
  if (request.empty()) {
    throw Error(ErrorKind::ConfigError, "chat request has no messages");
  }
  CallRecord record;
  record.request_hash = request_digest(handle, request, sample_index);

  if (cache_) {
    if (auto hit = cache_->get(record.request_hash)) {
      record.reply_text = *hit;
      record.from_cache = true;
      record.attempt_count = 1;
      return {*hit, record};
    }
  }

  RateLimiter& limiter = limiter_for(handle);
  const auto start = std::chrono::steady_clock::now();
  for (int attempt = 1;; ++attempt) {
    record.attempt_count = attempt;
    try {
      limiter.acquire();
      BackendReply reply = backend_->complete(handle, request, sample_index);
      if (reply.text.empty()) {
        throw Error(ErrorKind::EmptyReply, "backend returned an empty reply body");
      }
      record.reply_text = reply.text;
      record.token_usage = reply.usage;
      record.latency_seconds =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      if (cache_) cache_->put(record.request_hash, reply.text);
      return {std::move(reply.text), record};
    } catch (const Error& err) {
      if (!transient(err.kind()) || attempt > config_.max_retries) throw;
      const double backoff = std::min(
          config_.backoff_max_seconds,
          config_.backoff_base_seconds * std::pow(2.0, static_cast<double>(attempt - 1)));
      std::this_thread::sleep_for(std::chrono::duration<double>(backoff));
    }
  }
}

std::vector<std::string> Gateway::collect_samples(const BackendHandle& handle,
                                                  const ChatRequest& request, int count) {
  if (count < 1) {
    throw Error(ErrorKind::ConfigError, "sample count must be at least 1");
  }
  std::vector<std::exception_ptr> errors;
  std::vector<std::string> replies = util::parallel_map<std::string>(
      static_cast<std::size_t>(count), static_cast<std::size_t>(handle.max_inflight),
      [&](std::size_t index) { return chat(handle, request, static_cast<int>(index)).first; },
      &errors);

  std::vector<SampleFailure> failures;
  std::vector<std::optional<std::string>> partial(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    if (errors[static_cast<std::size_t>(i)]) {
      SampleFailure failure;
      failure.index = i;
      try {
        std::rethrow_exception(errors[static_cast<std::size_t>(i)]);
      } catch (const Error& err) {
        failure.kind = err.kind();
        failure.message = err.what();
      } catch (const std::exception& ex) {
        failure.message = ex.what();
      }
      failures.push_back(std::move(failure));
    } else {
      partial[static_cast<std::size_t>(i)] = replies[static_cast<std::size_t>(i)];
    }
  }
  if (!failures.empty()) {
    throw PartialFailureError(std::move(partial), std::move(failures));
  }
  return replies;
}

}  // namespace ropd::gateway
