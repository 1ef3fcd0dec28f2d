#include "ropd/util/digest.hpp"

#include <openssl/evp.h>

#include <array>
#include <stdexcept>

namespace ropd::util {

namespace {

std::array<unsigned char, 32> sha256_raw(std::string_view data) {
  std::array<unsigned char, 32> out{};
  unsigned int len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (ctx == nullptr ||
      EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx, data.data(), data.size()) != 1 ||
      EVP_DigestFinal_ex(ctx, out.data(), &len) != 1) {
    EVP_MD_CTX_free(ctx);
    throw std::runtime_error("sha256 digest failed");
  }
  EVP_MD_CTX_free(ctx);
  return out;
}

std::string to_hex(const std::array<unsigned char, 32>& raw) {
  static const char* digits = "0123456789abcdef";
  std::string hex;
  hex.reserve(64);
  for (unsigned char b : raw) {
    hex.push_back(digits[b >> 4]);
    hex.push_back(digits[b & 0xf]);
  }
  return hex;
}

}  // namespace

std::string sha256_hex(std::string_view data) {
  return to_hex(sha256_raw(data));
}

std::string sha256_hex(std::initializer_list<std::string_view> parts) {
  std::string framed;
  for (std::string_view part : parts) {
    framed += std::to_string(part.size());
    framed.push_back(':');
    framed.append(part);
  }
  return sha256_hex(framed);
}

std::uint64_t seed_from_tag(std::string_view tag) {
  auto raw = sha256_raw(tag);
  std::uint64_t seed = 0;
  for (int i = 0; i < 8; ++i) {
    seed = (seed << 8) | raw[static_cast<std::size_t>(i)];
  }
  return seed;
}

}  // namespace ropd::util
