#pragma once

#include <string>
#include <vector>

#include "ropd/gateway/gateway.hpp"
#include "ropd/gateway/types.hpp"
#include "ropd/rubric/types.hpp"

namespace ropd::rubric {

struct RubricEngineConfig {
  double rubricator_temperature = 0.7;
  double verifier_temperature = 0.0;
  int schema_retries = 2;  // re-asks after a malformed or invalid reply
  bool strict_schema = false;
  double eps = 1e-8;  // score denominator epsilon
  // A prompt is skipped when strictly more than this fraction of its
  // verifications fail.
  double skip_failure_fraction = 0.25;
};

// Single system-role message carrying the fully rendered rubric-induction
// prompt for (question, m teacher answers, n student rollouts).
gateway::ChatRequest build_rubricator_request(
    const std::string& prompt, const std::vector<std::string>& teacher_answers,
    const std::vector<std::string>& student_rollouts,
    const RubricEngineConfig& config = {});

// Accepts a fenced ```json block or a bare object; validates every schema
// constraint (version tag, K band, weights, consistency fields).
RubricSet parse_rubric_set(const std::string& raw_reply, bool strict = false);

gateway::ChatRequest build_verifier_request(const std::string& prompt,
                                            const std::string& response,
                                            const RubricSet& rubric,
                                            const RubricEngineConfig& config = {});

VerifierReport parse_verifier_report(const std::string& raw_reply,
                                     const RubricSet& rubric);

// s = sum(w_k * v_k) / (sum(w_k) + eps)
double weighted_pass_rate(const std::vector<bool>& judgements,
                          const std::vector<int>& weights, double eps = 1e-8);

// First JSON object found in a chat reply (fenced or bare). ParseError when
// no parseable object exists.
json extract_json_object(const std::string& raw_reply);

// Follow-up request asking the backend to fix a rejected reply: the original
// request plus the bad reply and the validation error.
gateway::ChatRequest repair_request(const gateway::ChatRequest& original,
                                    const std::string& bad_reply,
                                    const std::string& error_message);

// Full induction round trip: ask the Rubricator, parse, and re-ask with the
// validation error up to schema_retries times on repairable failures.
// Throws the last validation error (or the transport error) on exhaustion.
RubricSet induce_rubric_set(gateway::Gateway& gateway,
                            const gateway::BackendHandle& rubricator,
                            const std::string& prompt,
                            const std::vector<std::string>& teacher_answers,
                            const std::vector<std::string>& student_rollouts,
                            const RubricEngineConfig& config = {});

}  // namespace ropd::rubric
