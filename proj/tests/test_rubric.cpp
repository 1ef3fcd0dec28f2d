#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "ropd/error.hpp"
#include "ropd/gateway/backend.hpp"
#include "ropd/gateway/gateway.hpp"
#include "ropd/orch/toy_task.hpp"
#include "ropd/rubric/engine.hpp"
#include "ropd/rubric/pool.hpp"
#include "ropd/rubric/templates.hpp"
#include "ropd/rubric/types.hpp"
#include "ropd/util/fs.hpp"
#include "ropd/util/rng.hpp"

using nlohmann::json;
using ropd::Error;
using ropd::ErrorKind;
namespace rubric = ropd::rubric;
namespace gateway = ropd::gateway;
namespace toy = ropd::orch::toy;

namespace {

rubric::RubricSet worked_example_rubric() {
  const std::string raw =
      ropd::util::read_file(std::string(ROPD_FIXTURE_DIR) + "/table5_rubric.json");
  return rubric::parse_rubric_set(raw);
}

// Random but always-valid rubric JSON; the fuzzer mutates copies of this.
json random_valid_rubric_json(ropd::util::Rng& rng) {
  const int k = rng.uniform_int(4, 12);
  json items = json::array();
  int total = 0;
  const char* categories[] = {"Task Completion", "Observable Quality",
                              "General Reasoning"};
  for (int i = 0; i < k; ++i) {
    const int weight = rng.uniform_int(1, 5);
    total += weight;
    items.push_back({{"criterion_id", "c" + std::to_string(i)},
                     {"category", categories[rng.uniform_int(0, 2)]},
                     {"criterion", "criterion text " + std::to_string(i)},
                     {"weight", weight}});
  }
  return {{"schema_version", rubric::kRubricSchemaVersion},
          {"question_domain", "synthetic"},
          {"rubrics", std::move(items)},
          {"K", k},
          {"max_weighted_sum", total},
          {"estimated_student_pass_rate", rng.uniform(0.0, 0.49)}};
}

json random_valid_verifier_json(ropd::util::Rng& rng, const rubric::RubricSet& set) {
  json judgements = json::array();
  int score = 0;
  for (std::size_t i = 0; i < set.items.size(); ++i) {
    const bool v = rng.flip();
    judgements.push_back(v);
    if (v) score += set.items[i].weight;
  }
  return {{"schema_version", rubric::kVerifierSchemaVersion},
          {"judgements", std::move(judgements)},
          {"weighted_score", score},
          {"pass_rate", static_cast<double>(score) / set.total_weight()}};
}

void check_rejected(const json& j, ErrorKind expected, bool strict = false) {
  try {
    rubric::rubric_set_from_json(j, strict);
    FAIL("mutant accepted: ", j.dump());
  } catch (const Error& e) {
    CHECK(e.kind() == expected);
  }
}

void check_verifier_rejected(const json& j, const rubric::RubricSet& set,
                             ErrorKind expected) {
  try {
    rubric::verifier_report_from_json(j, set);
    FAIL("mutant accepted: ", j.dump());
  } catch (const Error& e) {
    CHECK(e.kind() == expected);
  }
}

}  // namespace

TEST_CASE("weighted pass rate matches the worked two-rollout example") {
  const std::vector<int> weights = {5, 5, 4, 5, 3};
  const std::vector<bool> rollout_a = {true, false, true, true, true};
  const std::vector<bool> rollout_c = {true, false, false, false, false};

  CHECK(std::abs(rubric::weighted_pass_rate(rollout_a, weights) - 17.0 / 22.0) < 1e-9);
  CHECK(std::abs(rubric::weighted_pass_rate(rollout_c, weights) - 5.0 / 22.0) < 1e-9);

  // eps only regularizes the denominator; with eps 0 the ratio is exact.
  CHECK(rubric::weighted_pass_rate(rollout_a, weights, 0.0) == 17.0 / 22.0);
  CHECK(rubric::weighted_pass_rate(rollout_c, weights, 0.0) == 5.0 / 22.0);
}

TEST_CASE("weighted pass rate agrees with a direct summation oracle") {
  ropd::util::Rng rng(101);
  for (int round = 0; round < 200; ++round) {
    const int k = rng.uniform_int(1, 12);
    std::vector<int> weights;
    std::vector<bool> judgements;
    for (int i = 0; i < k; ++i) {
      weights.push_back(rng.uniform_int(1, 5));
      judgements.push_back(rng.flip());
    }
    double num = 0.0;
    double den = 1e-8;
    for (int i = 0; i < k; ++i) {
      if (judgements[i]) num += weights[i];
      den += weights[i];
    }
    const double got = rubric::weighted_pass_rate(judgements, weights);
    CHECK(got == doctest::Approx(num / den).epsilon(1e-15));
    CHECK(got >= 0.0);
    CHECK(got < 1.0);  // eps keeps even an all-pass score under 1
  }
}

TEST_CASE("weighted pass rate is monotone in flipped judgements") {
  ropd::util::Rng rng(202);
  for (int round = 0; round < 100; ++round) {
    const int k = rng.uniform_int(2, 12);
    std::vector<int> weights;
    std::vector<bool> judgements;
    for (int i = 0; i < k; ++i) {
      weights.push_back(rng.uniform_int(1, 5));
      judgements.push_back(rng.flip());
    }
    const double base = rubric::weighted_pass_rate(judgements, weights);
    for (int i = 0; i < k; ++i) {
      if (judgements[i]) continue;
      std::vector<bool> flipped = judgements;
      flipped[i] = true;
      CHECK(rubric::weighted_pass_rate(flipped, weights) > base);
    }
  }
  CHECK(rubric::weighted_pass_rate({false, false}, {3, 4}) == 0.0);
  CHECK_THROWS_AS((void)rubric::weighted_pass_rate({}, {}), Error);
  CHECK_THROWS_AS((void)rubric::weighted_pass_rate({true}, {1, 2}), Error);
}

TEST_CASE("rubric and verifier JSON round-trip losslessly") {
  ropd::util::Rng rng(303);
  for (int round = 0; round < 50; ++round) {
    const json j = random_valid_rubric_json(rng);
    const rubric::RubricSet set = rubric::rubric_set_from_json(j, true);
    const rubric::RubricSet again = rubric::rubric_set_from_json(rubric::to_json(set), true);
    CHECK(set == again);

    const json vj = random_valid_verifier_json(rng, set);
    const rubric::VerifierReport report = rubric::verifier_report_from_json(vj, set);
    CHECK_FALSE(report.recompute_mismatch);
    const rubric::VerifierReport vagain =
        rubric::verifier_report_from_json(rubric::to_json(report), set);
    CHECK(report == vagain);
  }
}

TEST_CASE("fixture rubric parses to the published weights") {
  const rubric::RubricSet set = worked_example_rubric();
  CHECK(set.k_count == 5);
  CHECK(set.max_weighted_sum == 22);
  CHECK(set.weights() == std::vector<int>{5, 5, 4, 5, 3});
  CHECK(set.items[0].category == rubric::Category::TaskCompletion);
  CHECK(set.items[1].category == rubric::Category::ObservableQuality);
  CHECK(set.items[3].category == rubric::Category::GeneralReasoning);
}

TEST_CASE("schema fuzzing rejects five hundred mutants with the named error") {
  ropd::util::Rng rng(404);
  constexpr int kClasses = 27;
  int checked = 0;
  for (int i = 0; i < 500; ++i) {
    const int cls = i % kClasses;
    json j = random_valid_rubric_json(rng);
    const rubric::RubricSet base = rubric::rubric_set_from_json(j);
    switch (cls) {
      case 0:
        j.erase("schema_version");
        check_rejected(j, ErrorKind::SchemaMismatch);
        break;
      case 1:
        j["schema_version"] = "black_opd.rubric.v2";
        check_rejected(j, ErrorKind::SchemaMismatch);
        break;
      case 2:
        j.erase("question_domain");
        check_rejected(j, ErrorKind::ConstraintViolation);
        break;
      case 3:
        j.erase("rubrics");
        check_rejected(j, ErrorKind::ConstraintViolation);
        break;
      case 4:
        j.erase("K");
        check_rejected(j, ErrorKind::ConstraintViolation);
        break;
      case 5:
        j.erase("max_weighted_sum");
        check_rejected(j, ErrorKind::ConstraintViolation);
        break;
      case 6:
        j.erase("estimated_student_pass_rate");
        check_rejected(j, ErrorKind::ConstraintViolation);
        break;
      case 7: {
        // Consistent K=3 fixture: the band check itself must fire.
        json items = json::array();
        for (int t = 0; t < 3; ++t) {
          items.push_back({{"criterion_id", "c" + std::to_string(t)},
                           {"category", "Task Completion"},
                           {"criterion", "text"},
                           {"weight", 2}});
        }
        j["rubrics"] = items;
        j["K"] = 3;
        j["max_weighted_sum"] = 6;
        check_rejected(j, ErrorKind::ConstraintViolation);
        break;
      }
      case 8: {
        json items = json::array();
        for (int t = 0; t < 13; ++t) {
          items.push_back({{"criterion_id", "c" + std::to_string(t)},
                           {"category", "General Reasoning"},
                           {"criterion", "text"},
                           {"weight", 1}});
        }
        j["rubrics"] = items;
        j["K"] = 13;
        j["max_weighted_sum"] = 13;
        check_rejected(j, ErrorKind::ConstraintViolation);
        break;
      }
      case 9:
        j["K"] = base.k_count == 12 ? 11 : base.k_count + 1;
        check_rejected(j, ErrorKind::ConstraintViolation);
        break;
      case 10:
        j["rubrics"][0]["weight"] = 0;
        check_rejected(j, ErrorKind::ConstraintViolation);
        break;
      case 11:
        j["rubrics"][0]["weight"] = 6;
        check_rejected(j, ErrorKind::ConstraintViolation);
        break;
      case 12:
        j["rubrics"][0]["weight"] = 2.5;
        check_rejected(j, ErrorKind::ConstraintViolation);
        break;
      case 13:
        j["rubrics"][0]["category"] = "Style";
        check_rejected(j, ErrorKind::ConstraintViolation);
        break;
      case 14:
        j["rubrics"][1]["criterion_id"] = j["rubrics"][0]["criterion_id"];
        check_rejected(j, ErrorKind::ConstraintViolation);
        break;
      case 15:
        j["max_weighted_sum"] = base.max_weighted_sum + 1;
        check_rejected(j, ErrorKind::ConstraintViolation);
        break;
      case 16:
        j["estimated_student_pass_rate"] = 1.5;
        check_rejected(j, ErrorKind::ConstraintViolation);
        break;
      case 17: {
        j["estimated_student_pass_rate"] = 0.5 + rng.uniform(0.0, 0.5);
        check_rejected(j, ErrorKind::PassRateWarning, /*strict=*/true);
        // Lax mode keeps the record but flags it.
        const rubric::RubricSet lax = rubric::rubric_set_from_json(j, false);
        CHECK(lax.pass_rate_warning);
        break;
      }
      case 18:
        check_rejected(json::array({1, 2, 3}), ErrorKind::ParseError);
        break;
      case 19:
        j["rubrics"][0]["criterion"] = "";
        check_rejected(j, ErrorKind::ConstraintViolation);
        break;
      case 20: {
        json vj = random_valid_verifier_json(rng, base);
        vj.erase("schema_version");
        check_verifier_rejected(vj, base, ErrorKind::SchemaMismatch);
        break;
      }
      case 21: {
        json vj = random_valid_verifier_json(rng, base);
        vj["schema_version"] = rubric::kRubricSchemaVersion;
        check_verifier_rejected(vj, base, ErrorKind::SchemaMismatch);
        break;
      }
      case 22: {
        json vj = random_valid_verifier_json(rng, base);
        vj.erase("judgements");
        check_verifier_rejected(vj, base, ErrorKind::LengthMismatch);
        break;
      }
      case 23: {
        json vj = random_valid_verifier_json(rng, base);
        vj["judgements"] = "yes";
        check_verifier_rejected(vj, base, ErrorKind::LengthMismatch);
        break;
      }
      case 24: {
        json vj = random_valid_verifier_json(rng, base);
        vj["judgements"].erase(vj["judgements"].size() - 1);
        check_verifier_rejected(vj, base, ErrorKind::LengthMismatch);
        break;
      }
      case 25: {
        json vj = random_valid_verifier_json(rng, base);
        vj["judgements"].push_back(true);
        check_verifier_rejected(vj, base, ErrorKind::LengthMismatch);
        break;
      }
      case 26: {
        json vj = random_valid_verifier_json(rng, base);
        vj["judgements"][0] = 1;
        check_verifier_rejected(vj, base, ErrorKind::ConstraintViolation);
        break;
      }
      default:
        break;
    }
    ++checked;
  }
  CHECK(checked == 500);
}

TEST_CASE("verifier recompute overrides advisory numbers and flags disagreement") {
  const rubric::RubricSet set = worked_example_rubric();
  json vj = {{"schema_version", rubric::kVerifierSchemaVersion},
             {"judgements", {true, false, true, true, true}},
             {"weighted_score", 11},
             {"pass_rate", 0.5}};
  const rubric::VerifierReport report = rubric::verifier_report_from_json(vj, set);
  CHECK(report.recompute_mismatch);
  CHECK(report.weighted_score == 17);
  CHECK(report.pass_rate == 17.0 / 22.0);

  // Advisory fields may be absent entirely.
  vj.erase("weighted_score");
  vj.erase("pass_rate");
  const rubric::VerifierReport bare = rubric::verifier_report_from_json(vj, set);
  CHECK_FALSE(bare.recompute_mismatch);
  CHECK(bare.weighted_score == 17);
}

TEST_CASE("json extraction accepts fenced and bare objects") {
  const json inner = {{"a", 1}};
  CHECK(rubric::extract_json_object("```json\n{\"a\": 1}\n```") == inner);
  CHECK(rubric::extract_json_object("{\"a\": 1}") == inner);
  CHECK(rubric::extract_json_object("noise before {\"a\": 1} noise after") == inner);
  CHECK_THROWS_AS((void)rubric::extract_json_object("no json here"), Error);
  try {
    (void)rubric::extract_json_object("also not { json");
    FAIL("accepted");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::ParseError);
  }
}

TEST_CASE("rendered prompts carry every slot value verbatim") {
  const std::string question = "sort the digits 9 1 4";
  const std::vector<std::string> teachers = {"1 4 9 #", "1 4 9 # indeed"};
  const std::vector<std::string> students = {"9 4 1 #", "1 4 9", "4 1 9 #"};

  const std::string rendered =
      rubric::render_rubricator_prompt(question, teachers, students);
  CHECK(rendered.find(question) != std::string::npos);
  for (const std::string& t : teachers) CHECK(rendered.find(t) != std::string::npos);
  for (const std::string& s : students) CHECK(rendered.find(s) != std::string::npos);
  // Cardinality labels are substituted from the actual list sizes.
  CHECK(rendered.find("(2 answers)") != std::string::npos);
  CHECK(rendered.find("(3 rollouts)") != std::string::npos);
  // No slot markers survive rendering.
  CHECK(rendered.find("{question}") == std::string::npos);
  CHECK(rendered.find("{teacher_response") == std::string::npos);
  CHECK(rendered.find("{student_response") == std::string::npos);

  const rubric::RubricSet set = worked_example_rubric();
  const std::string verdict_prompt =
      rubric::render_verifier_prompt(question, students[0], set);
  CHECK(verdict_prompt.find(question) != std::string::npos);
  CHECK(verdict_prompt.find(students[0]) != std::string::npos);
  for (const rubric::RubricItem& item : set.items) {
    CHECK(verdict_prompt.find(item.criterion) != std::string::npos);
  }

  const gateway::ChatRequest request =
      rubric::build_rubricator_request(question, teachers, students);
  REQUIRE(request.messages.size() == 1);
  CHECK(request.messages[0].role == "system");
  CHECK(request.messages[0].content == rendered);
}

TEST_CASE("induction repairs rejected replies then gives up after the budget") {
  const std::string good = rubric::to_json(worked_example_rubric()).dump();
  json bad = rubric::to_json(worked_example_rubric());
  bad["K"] = 3;

  // Rules are ordered: the repair follow-up mentions the rejection, so the
  // first rule only matches re-asks.
  auto replay = std::make_shared<gateway::ReplayBackend>();
  replay->add_rule({{"previous reply was rejected"}, -1, "```json\n" + good + "\n```"});
  replay->add_rule({{}, -1, bad.dump()});
  gateway::Gateway gw(replay, gateway::GatewayConfig{});
  const auto handle = gateway::make_handle(gateway::Role::Rubricator, "", "replay");

  const rubric::RubricSet set =
      rubric::induce_rubric_set(gw, handle, "q", {"t"}, {"s1", "s2"});
  CHECK(set == worked_example_rubric());
  CHECK(replay->total_calls() == 2);

  // A backend that never produces a valid rubric exhausts schema_retries.
  auto hopeless = std::make_shared<gateway::ReplayBackend>();
  hopeless->add_rule({{}, -1, bad.dump()});
  gateway::Gateway gw2(hopeless, gateway::GatewayConfig{});
  rubric::RubricEngineConfig cfg;
  cfg.schema_retries = 2;
  try {
    (void)rubric::induce_rubric_set(gw2, handle, "q", {"t"}, {"s"}, cfg);
    FAIL("accepted a hopeless backend");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::ConstraintViolation);
  }
  CHECK(hopeless->total_calls() == 3);  // first ask + two re-asks
}

TEST_CASE("blind pool permutes entries but keeps per-student rewards invariant") {
  const std::string prompt = "5 2 7 =";
  const std::vector<std::string> teachers = {toy::sorted_answer_text(prompt)};
  const std::vector<std::string> students = {"2 5 7 #", "7 5 2 #", "2 5 #", "X Y Z",
                                             "2 5 7", "2 2 5 7 #"};
  const rubric::RubricSet set = toy::make_toy_rubric(prompt);

  std::vector<std::optional<double>> reference;
  std::set<std::string> orders;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const rubric::BlindPool pool = rubric::assemble_blind_pool(teachers, students, seed);
    REQUIRE(pool.entries().size() == teachers.size() + students.size());

    std::string order;
    for (const rubric::PoolEntry& entry : pool.entries()) order += entry.response_text + "|";
    orders.insert(order);

    gateway::Gateway gw(std::make_shared<toy::ToyVerifierBackend>(),
                        gateway::GatewayConfig{});
    const auto handle = gateway::make_handle(gateway::Role::Verifier, "", "toy");
    const rubric::PoolScore score = rubric::score_pool(pool, set, prompt, gw, handle);
    CHECK_FALSE(score.skipped);
    REQUIRE(score.student_rewards.size() == students.size());
    for (const auto& reward : score.student_rewards) CHECK(reward.has_value());
    if (reference.empty()) {
      reference = score.student_rewards;
    } else {
      CHECK(score.student_rewards == reference);
    }
    // Teacher reports come back under the teacher's own slot, not a student's.
    REQUIRE(score.teacher_reports.size() == 1);
    CHECK(score.teacher_reports[0].has_value());
  }
  CHECK(orders.size() > 1);  // different seeds really do shuffle

  // The exact-match criterion separates the sorted answer from the rest.
  const rubric::BlindPool pool = rubric::assemble_blind_pool(teachers, students, 3);
  gateway::Gateway gw(std::make_shared<toy::ToyVerifierBackend>(),
                      gateway::GatewayConfig{});
  const auto handle = gateway::make_handle(gateway::Role::Verifier, "", "toy");
  const rubric::PoolScore score = rubric::score_pool(pool, set, prompt, gw, handle);
  CHECK(score.student_rewards[0].value() > score.student_rewards[3].value());
}

TEST_CASE("pool skip trips only strictly above the failure fraction") {
  const std::string prompt = "3 1 =";
  const rubric::RubricSet set = toy::make_toy_rubric(prompt);
  const std::vector<std::string> students = {"1 3 #", "POISON a", "1 3", "3 1 #"};

  // Backend fails entries whose text carries the poison marker and judges
  // everything else all-true.
  auto backend = std::make_shared<gateway::MockChatBackend>(
      0, [&set](const gateway::BackendHandle&, const gateway::ChatRequest& request,
                int, std::uint64_t) -> std::string {
        std::string flat;
        for (const auto& m : request.messages) flat += m.content;
        if (flat.find("POISON") != std::string::npos) {
          throw Error(ErrorKind::BadStatus, "poisoned entry");
        }
        rubric::VerifierReport report;
        report.judgements.assign(set.items.size(), true);
        report.weighted_score = set.total_weight();
        report.pass_rate = 1.0;
        return rubric::to_json(report).dump();
      });
  gateway::GatewayConfig gw_config;
  gw_config.max_retries = 0;
  const auto handle = gateway::make_handle(gateway::Role::Verifier, "", "mock");

  // 1 failure out of 4 is exactly the default 0.25 threshold: not skipped.
  {
    gateway::Gateway gw(backend, gw_config);
    const rubric::BlindPool pool = rubric::assemble_blind_pool({}, students, 1);
    const rubric::PoolScore score = rubric::score_pool(pool, set, prompt, gw, handle);
    CHECK(score.failure_fraction == 0.25);
    CHECK_FALSE(score.skipped);
    CHECK_FALSE(score.student_rewards[1].has_value());
    CHECK(score.failures.size() == 1);
  }
  // 2 failures out of 4 exceeds it: skipped.
  {
    gateway::Gateway gw(backend, gw_config);
    const std::vector<std::string> worse = {"1 3 #", "POISON a", "POISON b", "3 1 #"};
    const rubric::BlindPool pool = rubric::assemble_blind_pool({}, worse, 1);
    const rubric::PoolScore score = rubric::score_pool(pool, set, prompt, gw, handle);
    CHECK(score.failure_fraction == 0.5);
    CHECK(score.skipped);
  }
}

TEST_CASE("pool rejects an empty student list") {
  CHECK_THROWS_AS((void)rubric::assemble_blind_pool({"t"}, {}, 0), Error);
}
