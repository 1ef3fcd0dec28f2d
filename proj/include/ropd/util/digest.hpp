#pragma once

#include <cstdint>
#include <initializer_list>
#include <string>
#include <string_view>

namespace ropd::util {

/// Hex-encoded SHA-256 of `data`.
std::string sha256_hex(std::string_view data);

/// Digest of several parts with unambiguous framing (length-prefixed join).
std::string sha256_hex(std::initializer_list<std::string_view> parts);

/// First 8 bytes of the SHA-256 as an integer. Used to derive stream seeds
/// from structured tags so every random draw is a pure function of the tag.
std::uint64_t seed_from_tag(std::string_view tag);

}  // namespace ropd::util
