#pragma once

#include <nlohmann/json.hpp>

#include <string>
#include <vector>

namespace ropd::rubric {

using json = nlohmann::json;

inline constexpr const char* kRubricSchemaVersion = "black_opd.rubric.v1";
inline constexpr const char* kVerifierSchemaVersion = "black_opd.verifier.v1";

enum class Category { TaskCompletion, ObservableQuality, GeneralReasoning };

const char* to_string(Category category);
Category category_from_string(const std::string& name);  // throws ConstraintViolation

/// One binary criterion with its integer weight in [1,5].
struct RubricItem {
  std::string criterion_id;
  Category category = Category::TaskCompletion;
  std::string criterion;
  int weight = 1;

  bool operator==(const RubricItem&) const = default;
};

/// A prompt's shared criteria set, as emitted by the Rubricator.
struct RubricSet {
  std::string question_domain;
  std::vector<RubricItem> items;
  int k_count = 0;
  int max_weighted_sum = 0;
  double estimated_student_pass_rate = 0.0;
  bool pass_rate_warning = false;  // set when the estimate is >= 0.5 in lax mode

  int total_weight() const;
  std::vector<int> weights() const;

  bool operator==(const RubricSet& other) const {
    return question_domain == other.question_domain && items == other.items &&
           k_count == other.k_count && max_weighted_sum == other.max_weighted_sum &&
           estimated_student_pass_rate == other.estimated_student_pass_rate;
  }
};

/// Blind verdicts for a single response. weighted_score and pass_rate are
/// recomputed from the judgements; recompute_mismatch flags replies whose
/// self-reported numbers disagreed.
struct VerifierReport {
  std::vector<bool> judgements;
  int weighted_score = 0;
  double pass_rate = 0.0;
  bool recompute_mismatch = false;

  bool operator==(const VerifierReport& other) const {
    return judgements == other.judgements &&
           weighted_score == other.weighted_score && pass_rate == other.pass_rate;
  }
};

json to_json(const RubricSet& set);
json to_json(const VerifierReport& report);

/// Validating constructors from already-parsed JSON. Throw Error with the
/// specific kind (SchemaMismatch / ConstraintViolation / LengthMismatch /
/// PassRateWarning in strict mode).
RubricSet rubric_set_from_json(const json& j, bool strict = false);
VerifierReport verifier_report_from_json(const json& j, const RubricSet& rubric);

}  // namespace ropd::rubric
