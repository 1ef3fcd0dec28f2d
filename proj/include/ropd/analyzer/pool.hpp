#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace ropd::analyzer {

using json = nlohmann::json;

inline constexpr const char* kPoolVersion = "ropd.pool.v1";

/// One scored rollout from an exported analysis pool. Judgement vectors and
/// the white-box fields (teacher_logprob, topk_overlap) are ingested when
/// present; unknown fields ride along opaquely in `extra`.
struct PoolRecord {
  std::string family;
  long checkpoint_step = 0;
  std::string prompt_id;
  std::string rollout_id;
  bool correct = false;
  double rubric_reward = 0.0;
  std::optional<std::vector<bool>> judgements;
  std::optional<std::vector<std::string>> categories;     // aligned with judgements
  std::optional<std::vector<std::string>> criterion_ids;  // aligned with judgements
  std::optional<double> teacher_logprob;
  std::optional<double> topk_overlap;
  json extra = json::object();

  bool operator==(const PoolRecord&) const = default;
};

json to_json(const PoolRecord& record);

// Validates field types and ranges; throws Error(MalformedRecord, reason).
PoolRecord pool_record_from_json(const json& j);

// First line must carry the pool version tag; every further line is one
// record. Throws MalformedRecord with "path:line" context, EmptyPool when
// no records follow the header.
std::vector<PoolRecord> load_pool(const std::string& path);

}  // namespace ropd::analyzer
