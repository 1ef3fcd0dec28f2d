#include "ropd/rubric/types.hpp"

#include <cmath>
#include <numeric>
#include <unordered_set>

#include "ropd/error.hpp"

namespace ropd::rubric {

namespace {

void require(bool ok, ErrorKind kind, const std::string& message) {
  if (!ok) throw Error(kind, message);
}

const json& field(const json& j, const char* name, ErrorKind kind) {
  auto it = j.find(name);
  if (it == j.end()) {
    throw Error(kind, std::string("missing field '") + name + "'");
  }
  return *it;
}

int int_field(const json& j, const char* name) {
  const json& v = field(j, name, ErrorKind::ConstraintViolation);
  require(v.is_number_integer(), ErrorKind::ConstraintViolation,
          std::string("field '") + name + "' must be an integer");
  return v.get<int>();
}

}  // namespace

const char* to_string(Category category) {
  switch (category) {
    case Category::TaskCompletion: return "Task Completion";
    case Category::ObservableQuality: return "Observable Quality";
    case Category::GeneralReasoning: return "General Reasoning";
  }
  return "Task Completion";
}

Category category_from_string(const std::string& name) {
  if (name == "Task Completion") return Category::TaskCompletion;
  if (name == "Observable Quality") return Category::ObservableQuality;
  if (name == "General Reasoning") return Category::GeneralReasoning;
  throw Error(ErrorKind::ConstraintViolation, "unknown category '" + name + "'");
}

int RubricSet::total_weight() const {
  return std::accumulate(items.begin(), items.end(), 0,
                         [](int acc, const RubricItem& it) { return acc + it.weight; });
}

std::vector<int> RubricSet::weights() const {
  std::vector<int> w;
  w.reserve(items.size());
  for (const RubricItem& item : items) w.push_back(item.weight);
  return w;
}

json to_json(const RubricSet& set) {
  json items = json::array();
  for (const RubricItem& item : set.items) {
    items.push_back({{"criterion_id", item.criterion_id},
                     {"category", to_string(item.category)},
                     {"criterion", item.criterion},
                     {"weight", item.weight}});
  }
  return {{"schema_version", kRubricSchemaVersion},
          {"question_domain", set.question_domain},
          {"rubrics", std::move(items)},
          {"K", set.k_count},
          {"max_weighted_sum", set.max_weighted_sum},
          {"estimated_student_pass_rate", set.estimated_student_pass_rate}};
}

json to_json(const VerifierReport& report) {
  json judgements = json::array();
  for (bool v : report.judgements) judgements.push_back(v);
  return {{"schema_version", kVerifierSchemaVersion},
          {"judgements", std::move(judgements)},
          {"weighted_score", report.weighted_score},
          {"pass_rate", report.pass_rate}};
}

RubricSet rubric_set_from_json(const json& j, bool strict) {
  require(j.is_object(), ErrorKind::ParseError, "rubric reply is not an object");

  const json& version = field(j, "schema_version", ErrorKind::SchemaMismatch);
  require(version.is_string() && version.get<std::string>() == kRubricSchemaVersion,
          ErrorKind::SchemaMismatch,
          "schema_version must be '" + std::string(kRubricSchemaVersion) + "'");

  RubricSet set;
  const json& domain = field(j, "question_domain", ErrorKind::ConstraintViolation);
  require(domain.is_string(), ErrorKind::ConstraintViolation,
          "question_domain must be a string");
  set.question_domain = domain.get<std::string>();

  const json& items = field(j, "rubrics", ErrorKind::ConstraintViolation);
  require(items.is_array(), ErrorKind::ConstraintViolation,
          "rubrics must be an array");

  std::unordered_set<std::string> seen_ids;
  for (const json& it : items) {
    require(it.is_object(), ErrorKind::ConstraintViolation,
            "rubric item must be an object");
    RubricItem item;
    const json& id = field(it, "criterion_id", ErrorKind::ConstraintViolation);
    require(id.is_string() && !id.get<std::string>().empty(),
            ErrorKind::ConstraintViolation, "criterion_id must be a nonempty string");
    item.criterion_id = id.get<std::string>();
    require(seen_ids.insert(item.criterion_id).second, ErrorKind::ConstraintViolation,
            "duplicate criterion_id '" + item.criterion_id + "'");

    const json& category = field(it, "category", ErrorKind::ConstraintViolation);
    require(category.is_string(), ErrorKind::ConstraintViolation,
            "category must be a string");
    item.category = category_from_string(category.get<std::string>());

    const json& criterion = field(it, "criterion", ErrorKind::ConstraintViolation);
    require(criterion.is_string() && !criterion.get<std::string>().empty(),
            ErrorKind::ConstraintViolation, "criterion must be a nonempty string");
    item.criterion = criterion.get<std::string>();

    const json& weight = field(it, "weight", ErrorKind::ConstraintViolation);
    require(weight.is_number_integer(), ErrorKind::ConstraintViolation,
            "weight must be an integer");
    item.weight = weight.get<int>();
    require(item.weight >= 1 && item.weight <= 5, ErrorKind::ConstraintViolation,
            "weight must be in [1,5], got " + std::to_string(item.weight));

    set.items.push_back(std::move(item));
  }

  set.k_count = int_field(j, "K");
  require(set.k_count >= 4 && set.k_count <= 12, ErrorKind::ConstraintViolation,
          "K must be an integer between 4 and 12, got " + std::to_string(set.k_count));
  require(set.k_count == static_cast<int>(set.items.size()),
          ErrorKind::ConstraintViolation,
          "K=" + std::to_string(set.k_count) + " disagrees with " +
              std::to_string(set.items.size()) + " rubric items");

  set.max_weighted_sum = int_field(j, "max_weighted_sum");
  require(set.max_weighted_sum == set.total_weight(), ErrorKind::ConstraintViolation,
          "max_weighted_sum=" + std::to_string(set.max_weighted_sum) +
              " disagrees with weight sum " + std::to_string(set.total_weight()));

  const json& rate =
      field(j, "estimated_student_pass_rate", ErrorKind::ConstraintViolation);
  require(rate.is_number(), ErrorKind::ConstraintViolation,
          "estimated_student_pass_rate must be a number");
  set.estimated_student_pass_rate = rate.get<double>();
  require(set.estimated_student_pass_rate >= 0.0 &&
              set.estimated_student_pass_rate <= 1.0,
          ErrorKind::ConstraintViolation,
          "estimated_student_pass_rate must be in [0,1]");
  if (set.estimated_student_pass_rate >= 0.5) {
    if (strict) {
      throw Error(ErrorKind::PassRateWarning,
                  "estimated_student_pass_rate must be strictly below 0.5");
    }
    set.pass_rate_warning = true;
  }
  return set;
}

VerifierReport verifier_report_from_json(const json& j, const RubricSet& rubric) {
  require(j.is_object(), ErrorKind::ParseError, "verifier reply is not an object");

  const json& version = field(j, "schema_version", ErrorKind::SchemaMismatch);
  require(version.is_string() && version.get<std::string>() == kVerifierSchemaVersion,
          ErrorKind::SchemaMismatch,
          "schema_version must be '" + std::string(kVerifierSchemaVersion) + "'");

  const json& judgements = field(j, "judgements", ErrorKind::LengthMismatch);
  require(judgements.is_array(), ErrorKind::LengthMismatch,
          "judgements must be an array");
  VerifierReport report;
  for (const json& v : judgements) {
    require(v.is_boolean(), ErrorKind::ConstraintViolation,
            "judgements entries must be booleans");
    report.judgements.push_back(v.get<bool>());
  }
  require(report.judgements.size() == rubric.items.size(), ErrorKind::LengthMismatch,
          "got " + std::to_string(report.judgements.size()) + " judgements for K=" +
              std::to_string(rubric.items.size()));

  // The reply's own weighted_score / pass_rate are advisory: recomputed
  // values are authoritative and disagreement just sets the flag.
  int recomputed = 0;
  for (std::size_t k = 0; k < report.judgements.size(); ++k) {
    if (report.judgements[k]) recomputed += rubric.items[k].weight;
  }
  const double denom = static_cast<double>(rubric.total_weight());
  const double recomputed_rate = denom > 0.0 ? recomputed / denom : 0.0;

  const json* reported_score = j.contains("weighted_score") ? &j["weighted_score"] : nullptr;
  const json* reported_rate = j.contains("pass_rate") ? &j["pass_rate"] : nullptr;
  if (reported_score != nullptr && reported_score->is_number() &&
      std::abs(reported_score->get<double>() - recomputed) > 1e-6) {
    report.recompute_mismatch = true;
  }
  if (reported_rate != nullptr && reported_rate->is_number() &&
      std::abs(reported_rate->get<double>() - recomputed_rate) > 1e-6) {
    report.recompute_mismatch = true;
  }

  report.weighted_score = recomputed;
  report.pass_rate = recomputed_rate;
  return report;
}

}  // namespace ropd::rubric
