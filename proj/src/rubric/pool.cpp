#include "ropd/rubric/pool.hpp"

#include <cstdio>

#include "ropd/util/parallel.hpp"
#include "ropd/util/rng.hpp"

namespace ropd::rubric {

BlindPool::BlindPool(std::vector<PoolEntry> entries,
                     std::map<std::string, Origin> origin_map, std::uint64_t shuffle_seed)
    : entries_(std::move(entries)),
      origin_map_(std::move(origin_map)),
      shuffle_seed_(shuffle_seed) {}

const Origin& BlindPool::origin_of(const std::string& entry_id) const {
  auto it = origin_map_.find(entry_id);
  if (it == origin_map_.end()) {
    throw Error(ErrorKind::EmptyPool, "unknown pool entry '" + entry_id + "'");
  }
  return it->second;
}

BlindPool assemble_blind_pool(const std::vector<std::string>& teacher_answers,
                              const std::vector<std::string>& student_rollouts,
                              std::uint64_t seed) {
  if (student_rollouts.empty()) {
    throw Error(ErrorKind::EmptyPool, "blind pool needs at least one student rollout");
  }
  struct Tagged {
    Origin origin;
    const std::string* text;
  };
  std::vector<Tagged> combined;
  combined.reserve(teacher_answers.size() + student_rollouts.size());
  for (std::size_t j = 0; j < teacher_answers.size(); ++j) {
    combined.push_back({{Origin::Kind::Teacher, static_cast<int>(j)}, &teacher_answers[j]});
  }
  for (std::size_t i = 0; i < student_rollouts.size(); ++i) {
    combined.push_back({{Origin::Kind::Student, static_cast<int>(i)}, &student_rollouts[i]});
  }

  util::Rng rng(seed);
  rng.shuffle(combined);

  std::vector<PoolEntry> entries;
  std::map<std::string, Origin> origin_map;
  entries.reserve(combined.size());
  for (std::size_t pos = 0; pos < combined.size(); ++pos) {
    char id[24];
    std::snprintf(id, sizeof(id), "e%02zu", pos);
    entries.push_back({id, *combined[pos].text});
    origin_map.emplace(id, combined[pos].origin);
  }
  return BlindPool(std::move(entries), std::move(origin_map), seed);
}

namespace {

bool repairable(ErrorKind kind) {
  return kind == ErrorKind::ParseError || kind == ErrorKind::SchemaMismatch ||
         kind == ErrorKind::LengthMismatch || kind == ErrorKind::ConstraintViolation;
}

struct EntryOutcome {
  std::optional<VerifierReport> report;
  int attempts = 0;
  ErrorKind kind = ErrorKind::BadStatus;
  std::string message;
};

EntryOutcome verify_entry(const std::string& question, const std::string& response,
                          const RubricSet& rubric, gateway::Gateway& gateway,
                          const gateway::BackendHandle& handle,
                          const RubricEngineConfig& config) {
  EntryOutcome outcome;
  gateway::ChatRequest request = build_verifier_request(question, response, rubric, config);
  for (int ask = 0; ask <= config.schema_retries; ++ask) {
    outcome.attempts = ask + 1;
    std::string reply;
    try {
      reply = gateway.chat(handle, request, 0).first;
      outcome.report = parse_verifier_report(reply, rubric);
      return outcome;
    } catch (const Error& err) {
      outcome.kind = err.kind();
      outcome.message = err.what();
      if (!repairable(err.kind()) || ask == config.schema_retries) return outcome;
      request = repair_request(request, reply, err.what());
    }
  }
  return outcome;
}

}  // namespace

PoolScore score_pool(const BlindPool& pool, const RubricSet& rubric,
                     const std::string& question, gateway::Gateway& gateway,
                     const gateway::BackendHandle& verifier_handle,
                     const RubricEngineConfig& config) {
  const auto& entries = pool.entries();
  if (entries.empty()) {
    throw Error(ErrorKind::EmptyPool, "cannot score an empty pool");
  }

  int student_count = 0;
  int teacher_count = 0;
  for (const PoolEntry& entry : entries) {
    const Origin& origin = pool.origin_of(entry.entry_id);
    if (origin.kind == Origin::Kind::Student) {
      student_count = std::max(student_count, origin.index + 1);
    } else {
      teacher_count = std::max(teacher_count, origin.index + 1);
    }
  }

  std::vector<EntryOutcome> outcomes = util::parallel_map<EntryOutcome>(
      entries.size(), static_cast<std::size_t>(verifier_handle.max_inflight),
      [&](std::size_t i) {
        return verify_entry(question, entries[i].response_text, rubric, gateway,
                            verifier_handle, config);
      });

  PoolScore score;
  score.student_rewards.resize(static_cast<std::size_t>(student_count));
  score.student_reports.resize(static_cast<std::size_t>(student_count));
  score.teacher_reports.resize(static_cast<std::size_t>(teacher_count));

  const std::vector<int> weights = rubric.weights();
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const PoolEntry& entry = entries[i];
    const EntryOutcome& outcome = outcomes[i];
    if (!outcome.report) {
      score.failures.push_back(
          {entry.entry_id, outcome.kind, outcome.message, outcome.attempts});
      continue;
    }
    score.reports.emplace(entry.entry_id, *outcome.report);
    const Origin& origin = pool.origin_of(entry.entry_id);
    const auto slot = static_cast<std::size_t>(origin.index);
    if (origin.kind == Origin::Kind::Student) {
      score.student_reports[slot] = *outcome.report;
      score.student_rewards[slot] =
          weighted_pass_rate(outcome.report->judgements, weights, config.eps);
    } else {
      score.teacher_reports[slot] = *outcome.report;
    }
  }

  score.failure_fraction =
      static_cast<double>(score.failures.size()) / static_cast<double>(entries.size());
  score.skipped = score.failure_fraction > config.skip_failure_fraction;
  return score;
}

}  // namespace ropd::rubric
