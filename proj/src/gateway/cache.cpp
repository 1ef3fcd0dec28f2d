#include "ropd/gateway/cache.hpp"

#include <filesystem>

#include "ropd/error.hpp"
#include "ropd/util/digest.hpp"
#include "ropd/util/fs.hpp"

namespace fs = std::filesystem;

namespace ropd::gateway {

ReplyCache::ReplyCache(std::string dir) : dir_(std::move(dir)) {
  if (dir_.empty()) {
    throw Error(ErrorKind::ConfigError, "cache directory must be nonempty");
  }
}

std::string ReplyCache::object_path(const std::string& payload_digest) const {
  return dir_ + "/objects/" + payload_digest;
}

std::string ReplyCache::index_path(const std::string& key) const {
  // Keys are already hex digests; hash again so arbitrary key strings
  // still yield safe file names.
  return dir_ + "/index/" + util::sha256_hex(key);
}

void ReplyCache::put(const std::string& key, const std::string& payload) {
  std::lock_guard<std::mutex> lock(mutex_);
  const std::string payload_digest = util::sha256_hex(payload);
  const std::string opath = object_path(payload_digest);
  std::error_code ec;
  if (!fs::exists(opath, ec)) {
    util::atomic_write_file(opath, payload);
  }
  util::atomic_write_file(index_path(key), payload_digest);
}

std::optional<std::string> ReplyCache::get(const std::string& key) const {
  std::lock_guard<std::mutex> lock(mutex_);
  const std::string ipath = index_path(key);
  std::error_code ec;
  if (!fs::exists(ipath, ec)) return std::nullopt;
  const std::string payload_digest = util::read_file(ipath);
  const std::string opath = object_path(payload_digest);
  if (!fs::exists(opath, ec)) {
    throw Error(ErrorKind::CorruptEntry,
                "cache index points to missing object " + payload_digest);
  }
  std::string payload = util::read_file(opath);
  if (util::sha256_hex(payload) != payload_digest) {
    throw Error(ErrorKind::CorruptEntry,
                "cache object " + payload_digest + " fails digest check");
  }
  return payload;
}

std::size_t ReplyCache::object_count() const {
  std::lock_guard<std::mutex> lock(mutex_);
  std::error_code ec;
  fs::directory_iterator it(dir_ + "/objects", ec);
  if (ec) return 0;
  std::size_t count = 0;
  for (const auto& entry : it) {
    if (entry.is_regular_file()) ++count;
  }
  return count;
}

}  // namespace ropd::gateway
