#include "ropd/rubric/engine.hpp"

#include "ropd/error.hpp"
#include "ropd/rubric/templates.hpp"

namespace ropd::rubric {

gateway::ChatRequest build_rubricator_request(
    const std::string& prompt, const std::vector<std::string>& teacher_answers,
    const std::vector<std::string>& student_rollouts, const RubricEngineConfig& config) {
  if (teacher_answers.empty()) {
    throw Error(ErrorKind::EmptyInput, "rubric induction needs at least one teacher answer");
  }
  if (student_rollouts.empty()) {
    throw Error(ErrorKind::EmptyInput, "rubric induction needs at least one student rollout");
  }
  gateway::ChatRequest request;
  request.messages.push_back(
      {"system", render_rubricator_prompt(prompt, teacher_answers, student_rollouts)});
  request.temperature = config.rubricator_temperature;
  return request;
}

gateway::ChatRequest build_verifier_request(const std::string& prompt,
                                            const std::string& response,
                                            const RubricSet& rubric,
                                            const RubricEngineConfig& config) {
  gateway::ChatRequest request;
  request.messages.push_back({"system", render_verifier_prompt(prompt, response, rubric)});
  request.temperature = config.verifier_temperature;
  return request;
}

json extract_json_object(const std::string& raw_reply) {
  // Fenced block first: ```json ... ``` or plain ``` ... ```.
  const std::size_t fence = raw_reply.find("```");
  if (fence != std::string::npos) {
    std::size_t body_start = raw_reply.find('\n', fence);
    if (body_start != std::string::npos) {
      ++body_start;
      const std::size_t closing = raw_reply.find("```", body_start);
      if (closing != std::string::npos) {
        const std::string inner = raw_reply.substr(body_start, closing - body_start);
        try {
          return json::parse(inner);
        } catch (const json::exception& ex) {
          throw Error(ErrorKind::ParseError,
                      std::string("fenced block is not valid JSON: ") + ex.what());
        }
      }
    }
  }
  const std::size_t open = raw_reply.find('{');
  const std::size_t close = raw_reply.rfind('}');
  if (open == std::string::npos || close == std::string::npos || close < open) {
    throw Error(ErrorKind::ParseError, "reply contains no JSON object");
  }
  try {
    return json::parse(raw_reply.substr(open, close - open + 1));
  } catch (const json::exception& ex) {
    throw Error(ErrorKind::ParseError,
                std::string("reply is not valid JSON: ") + ex.what());
  }
}

RubricSet parse_rubric_set(const std::string& raw_reply, bool strict) {
  return rubric_set_from_json(extract_json_object(raw_reply), strict);
}

VerifierReport parse_verifier_report(const std::string& raw_reply,
                                     const RubricSet& rubric) {
  return verifier_report_from_json(extract_json_object(raw_reply), rubric);
}

double weighted_pass_rate(const std::vector<bool>& judgements,
                          const std::vector<int>& weights, double eps) {
  if (judgements.empty() || weights.empty()) {
    throw Error(ErrorKind::EmptyRubric, "weighted pass rate over an empty rubric");
  }
  if (judgements.size() != weights.size()) {
    throw Error(ErrorKind::LengthMismatch,
                std::to_string(judgements.size()) + " judgements against " +
                    std::to_string(weights.size()) + " weights");
  }
  double numerator = 0.0;
  double denominator = 0.0;
  for (std::size_t k = 0; k < weights.size(); ++k) {
    if (weights[k] < 1) {
      throw Error(ErrorKind::ConstraintViolation,
                  "weight must be at least 1, got " + std::to_string(weights[k]));
    }
    denominator += weights[k];
    if (judgements[k]) numerator += weights[k];
  }
  return numerator / (denominator + eps);
}

gateway::ChatRequest repair_request(const gateway::ChatRequest& original,
                                    const std::string& bad_reply,
                                    const std::string& error_message) {
  gateway::ChatRequest request = original;
  request.messages.push_back({"assistant", bad_reply});
  request.messages.push_back(
      {"user", "Your previous reply was rejected: " + error_message +
                   "\nReturn only the corrected JSON object, without any additional "
                   "text or commentary."});
  return request;
}

RubricSet induce_rubric_set(gateway::Gateway& gateway,
                            const gateway::BackendHandle& rubricator,
                            const std::string& prompt,
                            const std::vector<std::string>& teacher_answers,
                            const std::vector<std::string>& student_rollouts,
                            const RubricEngineConfig& config) {
  gateway::ChatRequest request =
      build_rubricator_request(prompt, teacher_answers, student_rollouts, config);
  for (int attempt = 0;; ++attempt) {
    const auto [reply, record] = gateway.chat(rubricator, request, 0);
    try {
      return parse_rubric_set(reply, config.strict_schema);
    } catch (const Error& err) {
      const bool repairable = err.kind() == ErrorKind::ParseError ||
                              err.kind() == ErrorKind::SchemaMismatch ||
                              err.kind() == ErrorKind::ConstraintViolation ||
                              err.kind() == ErrorKind::LengthMismatch ||
                              err.kind() == ErrorKind::PassRateWarning ||
                              err.kind() == ErrorKind::EmptyRubric;
      if (!repairable || attempt >= config.schema_retries) throw;
      request = repair_request(request, reply, err.what());
    }
  }
}

}  // namespace ropd::rubric
