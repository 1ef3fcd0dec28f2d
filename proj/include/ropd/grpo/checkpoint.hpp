#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "ropd/grpo/optimizer.hpp"
#include "ropd/grpo/policy.hpp"

namespace ropd::grpo {

/// Training state snapshot. The binary layout is versioned and raw
/// little-endian doubles, so load(save(x)) is bit-exact.
struct Checkpoint {
  std::uint64_t step = 0;
  std::uint64_t rng_state = 0;        // run seed driving derived streams
  ToyPolicy policy;                   // theta
  ToyPolicy ref_policy;               // frozen pi_ref
  AdamWState optimizer;
  std::string config_hash;            // guards resume against config drift
  std::string metadata_json;          // effective config, embedded verbatim
};

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace ropd::grpo
