#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ropd/gateway/gateway.hpp"
#include "ropd/rubric/engine.hpp"
#include "ropd/rubric/types.hpp"

namespace ropd::rubric {

struct PoolEntry {
  std::string entry_id;
  std::string response_text;
};

struct Origin {
  enum class Kind { Teacher, Student };
  Kind kind = Kind::Student;
  int index = 0;  // position within the originating list
};

// Shuffled union of teacher answers and student rollouts under anonymous
// entry ids. The origin map stays inside the engine; verifier requests carry
// only entry text.
class BlindPool {
 public:
  BlindPool(std::vector<PoolEntry> entries, std::map<std::string, Origin> origin_map,
            std::uint64_t shuffle_seed);

  const std::vector<PoolEntry>& entries() const { return entries_; }
  const Origin& origin_of(const std::string& entry_id) const;
  std::uint64_t shuffle_seed() const { return shuffle_seed_; }

 private:
  std::vector<PoolEntry> entries_;
  std::map<std::string, Origin> origin_map_;
  std::uint64_t shuffle_seed_;
};

// Deterministic permutation of the combined lists under the given seed.
// Teachers may be absent (anchor ablation); students may not.
BlindPool assemble_blind_pool(const std::vector<std::string>& teacher_answers,
                              const std::vector<std::string>& student_rollouts,
                              std::uint64_t seed);

struct EntryFailure {
  std::string entry_id;
  ErrorKind kind = ErrorKind::BadStatus;
  std::string message;
  int attempts = 0;  // schema re-asks consumed for this entry
};

struct PoolScore {
  std::map<std::string, VerifierReport> reports;  // by entry_id, successes only
  std::vector<EntryFailure> failures;
  // Indexed by position in the original student list. Reward uses the
  // eps-regularized weighted pass rate; absent on verification failure.
  std::vector<std::optional<double>> student_rewards;
  std::vector<std::optional<VerifierReport>> student_reports;
  // Teacher reports are diagnostics only and never enter a GRPO group.
  std::vector<std::optional<VerifierReport>> teacher_reports;
  double failure_fraction = 0.0;
  bool skipped = false;  // failure_fraction exceeded the configured threshold
};

// One verification call per entry with schema-repair re-asks; per-entry
// failures are recorded, never thrown.
PoolScore score_pool(const BlindPool& pool, const RubricSet& rubric,
                     const std::string& question, gateway::Gateway& gateway,
                     const gateway::BackendHandle& verifier_handle,
                     const RubricEngineConfig& config = {});

}  // namespace ropd::rubric
