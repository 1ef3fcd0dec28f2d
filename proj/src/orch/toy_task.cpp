#include "ropd/orch/toy_task.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "ropd/error.hpp"
#include "ropd/rubric/templates.hpp"
#include "ropd/util/digest.hpp"
#include "ropd/util/rng.hpp"

namespace ropd::orch::toy {

const std::vector<std::string>& lexemes() {
  // Core task vocabulary in the first 16 slots; extra filler lexemes let a
  // policy configured with a larger vocabulary still detokenize every id.
  static const std::vector<std::string> table = {
      "0", "1", "2", "3", "4", "5", "6", "7", "8", "9", "#", "X", "Y", "Z", "W", "=",
      "a", "b", "c", "d", "e", "f", "g", "h", "i", "j", "k", "l", "m", "n", "o", "p"};
  return table;
}

bool is_digit_token(int token) { return token >= 0 && token <= 9; }

std::vector<int> tokenize(const std::string& text) {
  const auto& table = lexemes();
  std::vector<int> tokens;
  std::istringstream in(text);
  std::string word;
  while (in >> word) {
    auto it = std::find(table.begin(), table.end(), word);
    if (it != table.end()) {
      tokens.push_back(static_cast<int>(it - table.begin()));
    }
    // Unknown words (origin labels among them) carry no tokens.
  }
  return tokens;
}

std::string detokenize(const std::vector<int>& tokens) {
  const auto& table = lexemes();
  std::string text;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (tokens[i] < 0 || tokens[i] >= static_cast<int>(table.size())) {
      throw Error(ErrorKind::TokenOutOfVocab,
                  "token " + std::to_string(tokens[i]) + " outside the toy vocabulary");
    }
    if (i > 0) text += ' ';
    text += table[static_cast<std::size_t>(tokens[i])];
  }
  return text;
}

std::vector<PromptRecord> make_dataset(int count, std::uint64_t seed) {
  util::Rng rng(seed);
  std::vector<PromptRecord> records;
  records.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    const int digits = rng.uniform_int(2, 3);
    std::string prompt;
    for (int d = 0; d < digits; ++d) {
      prompt += std::to_string(rng.uniform_int(0, 9));
      prompt += ' ';
    }
    prompt += '=';
    char id[16];
    std::snprintf(id, sizeof(id), "p%03d", i);
    records.push_back({id, prompt});
  }
  return records;
}

std::vector<int> prompt_digits(const std::string& prompt_text) {
  std::vector<int> digits;
  for (int token : tokenize(prompt_text)) {
    if (is_digit_token(token)) digits.push_back(token);
  }
  return digits;
}

std::string sorted_answer_text(const std::string& prompt_text) {
  std::vector<int> digits = prompt_digits(prompt_text);
  std::sort(digits.begin(), digits.end());
  digits.push_back(kMarkerToken);
  return detokenize(digits);
}

bool oracle_correct(const std::string& prompt_text,
                    const std::vector<int>& response_tokens) {
  std::vector<int> expected = prompt_digits(prompt_text);
  std::sort(expected.begin(), expected.end());
  expected.push_back(kMarkerToken);
  return response_tokens == expected;
}

namespace {

bool has_digit_start_criterion(const std::string& prompt_text) {
  return util::seed_from_tag("toy-rubric|" + prompt_text) % 2 == 0;
}

}  // namespace

rubric::RubricSet make_toy_rubric(const std::string& prompt_text) {
  const std::size_t digit_count = prompt_digits(prompt_text).size();
  const std::string answer = sorted_answer_text(prompt_text);
  const std::string bound = std::to_string(digit_count + 1);

  rubric::RubricSet set;
  set.question_domain = "toy-sort";
  set.items = {
      {"c1_marker", rubric::Category::TaskCompletion,
       "Response ends with the terminal marker '#'.", 5},
      {"c2_exact", rubric::Category::TaskCompletion,
       "Response is exactly the sorted digit sequence followed by the marker: '" +
           answer + "'.",
       1},
      {"c3_clean", rubric::Category::ObservableQuality,
       "Response consists of at least one digit and nothing but digits before a "
       "single final marker.",
       5},
      {"c4_nondecreasing", rubric::Category::ObservableQuality,
       "Digits in the response appear in non-decreasing order.", 4},
      {"c5_length", rubric::Category::ObservableQuality,
       "Response is at most " + bound + " tokens long.", 4},
  };
  if (has_digit_start_criterion(prompt_text)) {
    set.items.push_back({"c6_digit_start", rubric::Category::GeneralReasoning,
                         "Response starts with a digit.", 2});
  }
  set.k_count = static_cast<int>(set.items.size());
  set.max_weighted_sum = set.total_weight();
  set.estimated_student_pass_rate = 0.25;
  return set;
}

bool judge_criterion(const std::string& criterion_id, const std::string& prompt_text,
                     const std::vector<int>& response_tokens) {
  const auto& tokens = response_tokens;
  if (criterion_id == "c1_marker") {
    return !tokens.empty() && tokens.back() == kMarkerToken;
  }
  if (criterion_id == "c2_exact") {
    return oracle_correct(prompt_text, tokens);
  }
  if (criterion_id == "c3_clean") {
    if (tokens.size() < 2 || tokens.back() != kMarkerToken) return false;
    for (std::size_t i = 0; i + 1 < tokens.size(); ++i) {
      if (!is_digit_token(tokens[i])) return false;
    }
    return true;
  }
  if (criterion_id == "c4_nondecreasing") {
    int prev = -1;
    for (int token : tokens) {
      if (!is_digit_token(token)) continue;
      if (prev >= 0 && token < prev) return false;
      prev = token;
    }
    return true;
  }
  if (criterion_id == "c5_length") {
    return tokens.size() <= prompt_digits(prompt_text).size() + 1;
  }
  if (criterion_id == "c6_digit_start") {
    return !tokens.empty() && is_digit_token(tokens.front());
  }
  throw Error(ErrorKind::ConstraintViolation,
              "toy verifier has no rule for criterion '" + criterion_id + "'");
}

std::string extract_between(const std::string& text, const std::string& after,
                            const std::string& before) {
  const std::size_t start = text.find(after);
  if (start == std::string::npos) {
    throw Error(ErrorKind::ParseError, "request is missing marker '" + after + "'");
  }
  const std::size_t begin = start + after.size();
  const std::size_t end = text.find(before, begin);
  if (end == std::string::npos) {
    throw Error(ErrorKind::ParseError, "request is missing marker '" + before + "'");
  }
  return text.substr(begin, end - begin);
}

gateway::BackendReply ToyTeacherBackend::complete(const gateway::BackendHandle&,
                                                  const gateway::ChatRequest& request,
                                                  int sample_index) {
  {
    std::lock_guard<std::mutex> lock(mutex_);
    ++total_calls_;
  }
  if (request.messages.empty()) {
    throw Error(ErrorKind::EmptyReply, "teacher request carries no prompt");
  }
  const std::string& prompt = request.messages.back().content;
  std::vector<int> digits = prompt_digits(prompt);
  if (digits.empty()) {
    throw Error(ErrorKind::EmptyReply, "teacher prompt has no digits to sort");
  }
  std::sort(digits.begin(), digits.end());
  digits.push_back(kMarkerToken);

  // Same token content under varying whitespace: distinct texts per sample
  // index, identical criterion behavior.
  const std::string gap(static_cast<std::size_t>(sample_index % 3) + 1, ' ');
  const auto& table = lexemes();
  std::string reply;
  for (std::size_t i = 0; i < digits.size(); ++i) {
    if (i > 0) reply += gap;
    reply += table[static_cast<std::size_t>(digits[i])];
  }
  return {reply, std::nullopt};
}

int ToyTeacherBackend::total_calls() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return total_calls_;
}

gateway::BackendReply ToyRubricatorBackend::complete(const gateway::BackendHandle&,
                                                     const gateway::ChatRequest& request,
                                                     int) {
  {
    std::lock_guard<std::mutex> lock(mutex_);
    ++total_calls_;
  }
  if (request.messages.empty()) {
    throw Error(ErrorKind::EmptyReply, "rubricator request carries no content");
  }
  const std::string& body = request.messages.front().content;
  const std::string question =
      extract_between(body, "[Question]: ", "\n\n[Teacher Responses]");
  const rubric::RubricSet set = make_toy_rubric(question);
  return {rubric::to_json(set).dump(2), std::nullopt};
}

int ToyRubricatorBackend::total_calls() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return total_calls_;
}

gateway::BackendReply ToyVerifierBackend::complete(const gateway::BackendHandle&,
                                                   const gateway::ChatRequest& request,
                                                   int) {
  if (request.messages.empty()) {
    throw Error(ErrorKind::EmptyReply, "verifier request carries no content");
  }
  const std::string& body = request.messages.front().content;
  const std::string question =
      extract_between(body, "Now evaluate the following:\nQuestion: ", "\nResponse: ");
  const std::string response = extract_between(body, "\nResponse: ", "\nRubrics: ");
  const std::string rubric_block = extract_between(
      body, "\nRubrics: ", "\n\nReturn only the JSON object, without any additional");
  {
    std::lock_guard<std::mutex> lock(mutex_);
    ++total_calls_;
    seen_responses_.push_back(response);
  }

  json items;
  try {
    items = json::parse(rubric_block);
  } catch (const json::exception& ex) {
    throw Error(ErrorKind::ParseError,
                std::string("verifier request rubric block is not JSON: ") + ex.what());
  }

  const std::vector<int> tokens = tokenize(response);
  json judgements = json::array();
  long weighted = 0;
  long total = 0;
  for (const json& item : items) {
    const std::string id = item.at("criterion_id").get<std::string>();
    const int weight = item.at("weight").get<int>();
    const bool pass = judge_criterion(id, question, tokens);
    judgements.push_back(pass);
    total += weight;
    if (pass) weighted += weight;
  }
  json reply = {{"schema_version", rubric::kVerifierSchemaVersion},
                {"judgements", std::move(judgements)},
                {"weighted_score", weighted},
                {"pass_rate", total > 0 ? static_cast<double>(weighted) /
                                              static_cast<double>(total)
                                        : 0.0}};
  return {reply.dump(2), std::nullopt};
}

int ToyVerifierBackend::total_calls() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return total_calls_;
}

}  // namespace ropd::orch::toy
