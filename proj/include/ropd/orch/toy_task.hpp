#pragma once

#include <cstdint>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "ropd/gateway/backend.hpp"
#include "ropd/orch/config.hpp"
#include "ropd/rubric/types.hpp"

namespace ropd::orch::toy {

// Vocabulary: digits 0..9, '#' terminal marker, X/Y/Z/W junk, '=' prompt cue.
// lexemes() carries 16 further filler words so policies configured with a
// vocabulary above kVocabSize still detokenize every sampled id.
inline constexpr int kVocabSize = 16;
inline constexpr int kMarkerToken = 10;
inline constexpr int kPromptEndToken = 15;

const std::vector<std::string>& lexemes();
bool is_digit_token(int token);

// Whitespace-split lexeme lookup. Origin labels ("[TEACHER]", "[STUDENT]")
// and unknown words are dropped, so annotated pool entries tokenize the
// same as blind ones.
std::vector<int> tokenize(const std::string& text);
std::string detokenize(const std::vector<int>& tokens);

// Prompts ask for the sorted form of a short digit sequence: "5 2 7 =".
// The '=' cue gives the order-2 policy a recognizable transition into
// answer position.
std::vector<PromptRecord> make_dataset(int count, std::uint64_t seed);

std::vector<int> prompt_digits(const std::string& prompt_text);
std::string sorted_answer_text(const std::string& prompt_text);

// Ground-truth label: response tokens are exactly the sorted digits
// followed by the terminal marker.
bool oracle_correct(const std::string& prompt_text, const std::vector<int>& response_tokens);

// Prompt-specific rubric the mock Rubricator emits: marker termination and
// exact answer (Task Completion), clean digit structure, non-decreasing
// order, length bound (Observable Quality), and on roughly half the prompts
// a digit-start criterion (General Reasoning), so K varies between 5 and 6.
rubric::RubricSet make_toy_rubric(const std::string& prompt_text);

// Programmatic judgement for one criterion_id against a tokenized response.
bool judge_criterion(const std::string& criterion_id, const std::string& prompt_text,
                     const std::vector<int>& response_tokens);

// Deterministic chat backends implementing the teacher / Rubricator /
// Verifier roles for the synthetic task. Each is a pure function of the
// request (the teacher also varies by sample_index).
class ToyTeacherBackend : public gateway::ChatBackend {
 public:
  gateway::BackendReply complete(const gateway::BackendHandle& handle,
                                 const gateway::ChatRequest& request,
                                 int sample_index) override;
  int total_calls() const;

 private:
  mutable std::mutex mutex_;
  int total_calls_ = 0;
};

class ToyRubricatorBackend : public gateway::ChatBackend {
 public:
  gateway::BackendReply complete(const gateway::BackendHandle& handle,
                                 const gateway::ChatRequest& request,
                                 int sample_index) override;
  int total_calls() const;

 private:
  mutable std::mutex mutex_;
  int total_calls_ = 0;
};

class ToyVerifierBackend : public gateway::ChatBackend {
 public:
  gateway::BackendReply complete(const gateway::BackendHandle& handle,
                                 const gateway::ChatRequest& request,
                                 int sample_index) override;
  int total_calls() const;
  const std::vector<std::string>& seen_responses() const { return seen_responses_; }

 private:
  mutable std::mutex mutex_;
  int total_calls_ = 0;
  std::vector<std::string> seen_responses_;  // raw {resp} slots, for blindness checks
};

// Substring between two markers; throws ParseError when absent.
std::string extract_between(const std::string& text, const std::string& after,
                            const std::string& before);

}  // namespace ropd::orch::toy
