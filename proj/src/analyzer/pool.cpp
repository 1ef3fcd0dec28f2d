#include "ropd/analyzer/pool.hpp"

#include <cmath>
#include <set>
#include <string>

#include "ropd/error.hpp"
#include "ropd/util/jsonl.hpp"

namespace ropd::analyzer {

namespace {

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys = {
      "family",     "checkpoint_step", "prompt_id",       "rollout_id",
      "correct",    "rubric_reward",   "judgements",      "categories",
      "criterion_ids", "teacher_logprob", "topk_overlap"};
  return keys;
}

[[noreturn]] void malformed(const std::string& reason) {
  throw Error(ErrorKind::MalformedRecord, reason);
}

double checked_fraction(const json& value, const char* field) {
  if (!value.is_number()) malformed(std::string(field) + " must be a number");
  const double v = value.get<double>();
  if (!(v >= 0.0 && v <= 1.0)) {
    malformed(std::string(field) + " must lie in [0,1], got " + value.dump());
  }
  return v;
}

}  // namespace

json to_json(const PoolRecord& record) {
  json j = record.extra;
  if (!j.is_object()) j = json::object();
  j["family"] = record.family;
  j["checkpoint_step"] = record.checkpoint_step;
  j["prompt_id"] = record.prompt_id;
  j["rollout_id"] = record.rollout_id;
  j["correct"] = record.correct;
  j["rubric_reward"] = record.rubric_reward;
  if (record.judgements) {
    json arr = json::array();
    for (const bool v : *record.judgements) arr.push_back(v);
    j["judgements"] = arr;
  }
  if (record.categories) j["categories"] = *record.categories;
  if (record.criterion_ids) j["criterion_ids"] = *record.criterion_ids;
  if (record.teacher_logprob) j["teacher_logprob"] = *record.teacher_logprob;
  if (record.topk_overlap) j["topk_overlap"] = *record.topk_overlap;
  return j;
}

PoolRecord pool_record_from_json(const json& j) {
  if (!j.is_object()) malformed("pool record must be a JSON object");
  for (const char* field : {"family", "prompt_id", "rollout_id"}) {
    if (!j.contains(field) || !j[field].is_string()) {
      malformed(std::string(field) + " must be present as a string");
    }
  }
  if (!j.contains("checkpoint_step") || !j["checkpoint_step"].is_number_integer()) {
    malformed("checkpoint_step must be present as an integer");
  }
  if (!j.contains("correct") || !j["correct"].is_boolean()) {
    malformed("correct must be present as a boolean");
  }
  if (!j.contains("rubric_reward")) malformed("rubric_reward is required");

  PoolRecord record;
  record.family = j["family"].get<std::string>();
  record.checkpoint_step = j["checkpoint_step"].get<long>();
  record.prompt_id = j["prompt_id"].get<std::string>();
  record.rollout_id = j["rollout_id"].get<std::string>();
  record.correct = j["correct"].get<bool>();
  record.rubric_reward = checked_fraction(j["rubric_reward"], "rubric_reward");

  if (j.contains("judgements")) {
    if (!j["judgements"].is_array()) malformed("judgements must be an array of booleans");
    std::vector<bool> judgements;
    for (const json& v : j["judgements"]) {
      if (!v.is_boolean()) malformed("judgements must be an array of booleans");
      judgements.push_back(v.get<bool>());
    }
    record.judgements = std::move(judgements);
  }
  if (j.contains("categories")) {
    if (!j["categories"].is_array()) malformed("categories must be an array of strings");
    std::vector<std::string> categories;
    for (const json& v : j["categories"]) {
      if (!v.is_string()) malformed("categories must be an array of strings");
      categories.push_back(v.get<std::string>());
    }
    record.categories = std::move(categories);
  }
  if (j.contains("criterion_ids")) {
    if (!j["criterion_ids"].is_array()) malformed("criterion_ids must be an array of strings");
    std::vector<std::string> ids;
    for (const json& v : j["criterion_ids"]) {
      if (!v.is_string()) malformed("criterion_ids must be an array of strings");
      ids.push_back(v.get<std::string>());
    }
    record.criterion_ids = std::move(ids);
  }
  if (record.categories && record.judgements &&
      record.categories->size() != record.judgements->size()) {
    malformed("categories and judgements disagree on criterion count");
  }
  if (record.criterion_ids && record.judgements &&
      record.criterion_ids->size() != record.judgements->size()) {
    malformed("criterion_ids and judgements disagree on criterion count");
  }
  if (j.contains("teacher_logprob")) {
    if (!j["teacher_logprob"].is_number()) malformed("teacher_logprob must be a number");
    const double v = j["teacher_logprob"].get<double>();
    if (!std::isfinite(v)) malformed("teacher_logprob must be finite");
    record.teacher_logprob = v;
  }
  if (j.contains("topk_overlap")) {
    record.topk_overlap = checked_fraction(j["topk_overlap"], "topk_overlap");
  }

  for (auto it = j.begin(); it != j.end(); ++it) {
    if (known_keys().count(it.key()) == 0) record.extra[it.key()] = it.value();
  }
  return record;
}

std::vector<PoolRecord> load_pool(const std::string& path) {
  std::vector<PoolRecord> records;
  bool header_checked = false;
  util::for_each_jsonl_record(path, [&](std::size_t line, const json& j) {
    if (!header_checked) {
      if (!j.is_object() || !j.contains("pool_version") ||
          j["pool_version"] != kPoolVersion) {
        throw Error(ErrorKind::MalformedRecord,
                    path + ":" + std::to_string(line) +
                        ": first line must be a header with pool_version \"" +
                        kPoolVersion + "\"");
      }
      header_checked = true;
      return;
    }
    try {
      records.push_back(pool_record_from_json(j));
    } catch (const Error& err) {
      throw Error(ErrorKind::MalformedRecord,
                  path + ":" + std::to_string(line) + ": " + err.what());
    }
  });
  if (!header_checked) {
    throw Error(ErrorKind::EmptyPool, "pool file " + path + " is empty");
  }
  if (records.empty()) {
    throw Error(ErrorKind::EmptyPool, "pool file " + path + " has a header but no records");
  }
  return records;
}

}  // namespace ropd::analyzer
