#pragma once

#include <cstddef>
#include <mutex>
#include <optional>
#include <string>

namespace ropd::gateway {

// Content-addressed, append-only reply store.
//
// Layout: <dir>/objects/<sha256(payload)> holds payload bytes;
// <dir>/index/<key> holds the payload digest. Identical payloads share one
// object file regardless of how many keys point at them. Reads verify the
// payload digest and throw CorruptEntry on mismatch.
class ReplyCache {
 public:
  explicit ReplyCache(std::string dir);

  // key is any stable digest string (see request_digest).
  void put(const std::string& key, const std::string& payload);
  std::optional<std::string> get(const std::string& key) const;

  std::size_t object_count() const;
  const std::string& dir() const { return dir_; }

 private:
  std::string object_path(const std::string& payload_digest) const;
  std::string index_path(const std::string& key) const;

  std::string dir_;
  mutable std::mutex mutex_;
};

}  // namespace ropd::gateway
