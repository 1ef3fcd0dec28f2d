#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "ropd/analyzer/metrics.hpp"
#include "ropd/analyzer/pool.hpp"
#include "ropd/analyzer/report.hpp"
#include "ropd/error.hpp"
#include "ropd/util/rng.hpp"

using nlohmann::json;
using ropd::Error;
using ropd::ErrorKind;
using ropd::util::Rng;
namespace analyzer = ropd::analyzer;
namespace fs = std::filesystem;

namespace {

// O(n^2) reference: enumerate every (correct, incorrect) pair.
analyzer::PairCounts brute_force_pairs(const std::vector<double>& scores,
                                       const std::vector<bool>& labels) {
  analyzer::PairCounts counts;
  for (const bool label : labels) {
    if (label) ++counts.positives; else ++counts.negatives;
  }
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!labels[i]) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j]) continue;
      if (scores[i] > scores[j]) ++counts.wins;
      else if (scores[i] < scores[j]) ++counts.losses;
      else ++counts.ties;
    }
  }
  return counts;
}

std::string pct(long count, long eligible) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f",
                100.0 * static_cast<double>(count) / static_cast<double>(eligible));
  return buf;
}

analyzer::PoolRecord single_criterion_record(const std::string& family, long step,
                                             const std::string& prompt_id,
                                             const std::string& criterion_id,
                                             const std::string& category, bool judgement) {
  analyzer::PoolRecord record;
  record.family = family;
  record.checkpoint_step = step;
  record.prompt_id = prompt_id;
  record.rollout_id = prompt_id + "_r0";
  record.correct = judgement;
  record.rubric_reward = judgement ? 0.9 : 0.1;
  record.judgements = std::vector<bool>{judgement};
  record.categories = std::vector<std::string>{category};
  record.criterion_ids = std::vector<std::string>{criterion_id};
  return record;
}

struct CategoryPlan {
  std::string category;
  long low_total = 0;       // cells with q_early < threshold
  long low_improved = 0;    // of those, q_final >= threshold
  long high_total = 0;      // cells with q_early >= threshold
  long high_regressed = 0;  // of those, q_final < threshold
};

// One single-criterion prompt per cell; early/final judgements realize the
// planned transition counts exactly.
void build_transition_slices(const std::vector<CategoryPlan>& plans,
                             const std::string& family, long early_step, long final_step,
                             std::vector<analyzer::PoolRecord>& early,
                             std::vector<analyzer::PoolRecord>& final_slice) {
  for (const CategoryPlan& plan : plans) {
    for (long c = 0; c < plan.low_total; ++c) {
      const std::string prompt = family + "_" + plan.category.substr(0, 2) + "_low" +
                                 std::to_string(c);
      early.push_back(single_criterion_record(family, early_step, prompt, "crit",
                                              plan.category, false));
      final_slice.push_back(single_criterion_record(family, final_step, prompt, "crit",
                                                    plan.category, c < plan.low_improved));
    }
    for (long c = 0; c < plan.high_total; ++c) {
      const std::string prompt = family + "_" + plan.category.substr(0, 2) + "_high" +
                                 std::to_string(c);
      early.push_back(single_criterion_record(family, early_step, prompt, "crit",
                                              plan.category, true));
      final_slice.push_back(single_criterion_record(family, final_step, prompt, "crit",
                                                    plan.category, c >= plan.high_regressed));
    }
  }
}

}  // namespace

TEST_CASE("pair counts match the quadratic oracle over random and tie-heavy pools") {
  Rng rng(808);
  for (int round = 0; round < 200; ++round) {
    const int n = 2 + static_cast<int>(rng.uniform_int(0, 98));
    std::vector<double> scores(static_cast<std::size_t>(n));
    std::vector<bool> labels(static_cast<std::size_t>(n));
    // Every third pool quantizes scores hard so ties dominate.
    const int levels = round % 3 == 0 ? 3 : 0;
    bool has_pos = false;
    bool has_neg = false;
    for (int i = 0; i < n; ++i) {
      double s = rng.uniform();
      if (levels > 0) s = std::floor(s * levels) / levels;
      scores[static_cast<std::size_t>(i)] = s;
      const bool label = rng.flip(0.5);
      labels[static_cast<std::size_t>(i)] = label;
      (label ? has_pos : has_neg) = true;
    }
    if (!has_pos) labels[0] = true;
    if (!has_neg) labels[static_cast<std::size_t>(n - 1)] = false;

    const analyzer::PairCounts fast = analyzer::pair_counts(scores, labels);
    const analyzer::PairCounts slow = brute_force_pairs(scores, labels);
    CHECK(fast.wins == slow.wins);
    CHECK(fast.ties == slow.ties);
    CHECK(fast.losses == slow.losses);
    CHECK(fast.positives == slow.positives);
    CHECK(fast.negatives == slow.negatives);
    // Partition identity: every cross-class pair lands in exactly one bucket.
    CHECK(fast.wins + fast.ties + fast.losses == fast.pairs());

    const double auc = analyzer::alignment_auc(scores, labels);
    const double conflict = analyzer::preference_conflict_rate(scores, labels);
    const double tie = analyzer::tie_rate(scores, labels);
    const double pairs = static_cast<double>(slow.pairs());
    CHECK(auc == (static_cast<double>(slow.wins) + 0.5 * static_cast<double>(slow.ties)) / pairs);
    CHECK(conflict == static_cast<double>(slow.losses) / pairs);
    CHECK(tie == 0.5 * static_cast<double>(slow.ties) / pairs);
    // AUC + conflict + tie partitions the pair mass.
    CHECK(std::abs(1.0 - auc - conflict - tie) < 1e-12);

    // Flipping score signs swaps wins and losses exactly.
    std::vector<double> negated(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) negated[i] = -scores[i];
    const analyzer::PairCounts flipped = analyzer::pair_counts(negated, labels);
    CHECK(flipped.wins == slow.losses);
    CHECK(flipped.losses == slow.wins);
    CHECK(flipped.ties == slow.ties);
    CHECK(std::abs(analyzer::alignment_auc(negated, labels) + auc - 1.0) < 1e-12);

    // Strictly increasing transforms leave every count unchanged.
    std::vector<double> warped(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) {
      warped[i] = scores[i] * scores[i] * scores[i] + 2.0 * scores[i];
    }
    const analyzer::PairCounts invariant = analyzer::pair_counts(warped, labels);
    CHECK(invariant.wins == slow.wins);
    CHECK(invariant.ties == slow.ties);
    CHECK(invariant.losses == slow.losses);
    CHECK(analyzer::alignment_auc(warped, labels) == auc);
  }
}

TEST_CASE("pair statistics on hand-computable pools") {
  // correct: {0.9, 0.5}, incorrect: {0.5, 0.2}. Pairs: (0.9,0.5) win,
  // (0.9,0.2) win, (0.5,0.5) tie, (0.5,0.2) win.
  const std::vector<double> scores = {0.9, 0.5, 0.5, 0.2};
  const std::vector<bool> labels = {true, true, false, false};
  const analyzer::PairCounts counts = analyzer::pair_counts(scores, labels);
  CHECK(counts.wins == 3);
  CHECK(counts.ties == 1);
  CHECK(counts.losses == 0);
  CHECK(counts.pairs() == 4);
  CHECK(analyzer::alignment_auc(scores, labels) == doctest::Approx(3.5 / 4.0));
  CHECK(analyzer::preference_conflict_rate(scores, labels) == 0.0);
  CHECK(analyzer::tie_rate(scores, labels) == doctest::Approx(0.125));

  try {
    (void)analyzer::pair_counts({0.1, 0.2}, {true, true});
    FAIL("single-class input accepted");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::SingleClass);
  }
  try {
    (void)analyzer::pair_counts({0.1, 0.2, 0.3}, {true, false});
    FAIL("ragged input accepted");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::LengthMismatch);
  }
}

TEST_CASE("criterion transitions reproduce the reported per-category rates") {
  // Shared-rubric training, step 50 -> 250.
  const std::vector<CategoryPlan> shared_plan = {
      {"Task Completion", 35, 17, 34, 1},
      {"Observable Quality", 58, 31, 68, 5},
      {"General Reasoning", 17, 7, 11, 1},
  };
  std::vector<analyzer::PoolRecord> early, final_slice;
  build_transition_slices(shared_plan, "tbl", 50, 250, early, final_slice);

  const analyzer::TransitionSummary summary =
      analyzer::criterion_transitions(early, final_slice, 0.5);

  const auto& tc = summary.by_category.at("Task Completion");
  CHECK(tc.improved == 17);
  CHECK(tc.eligible_low == 35);
  CHECK(tc.regressed == 1);
  CHECK(tc.eligible_high == 34);
  const auto& oq = summary.by_category.at("Observable Quality");
  CHECK(oq.improved == 31);
  CHECK(oq.eligible_low == 58);
  CHECK(oq.regressed == 5);
  CHECK(oq.eligible_high == 68);
  const auto& gr = summary.by_category.at("General Reasoning");
  CHECK(gr.improved == 7);
  CHECK(gr.eligible_low == 17);
  CHECK(gr.regressed == 1);
  CHECK(gr.eligible_high == 11);
  CHECK(summary.overall.improved == 55);
  CHECK(summary.overall.eligible_low == 110);
  CHECK(summary.overall.regressed == 7);
  CHECK(summary.overall.eligible_high == 113);

  CHECK(pct(tc.improved, tc.eligible_low) == "48.6");
  CHECK(pct(oq.improved, oq.eligible_low) == "53.4");
  CHECK(pct(gr.improved, gr.eligible_low) == "41.2");
  CHECK(pct(summary.overall.improved, summary.overall.eligible_low) == "50.0");
  CHECK(pct(tc.regressed, tc.eligible_high) == "2.9");
  CHECK(pct(oq.regressed, oq.eligible_high) == "7.4");
  CHECK(pct(gr.regressed, gr.eligible_high) == "9.1");
  CHECK(pct(summary.overall.regressed, summary.overall.eligible_high) == "6.2");

  // Cell partition: every common cell is eligible exactly once.
  long cells = 0;
  for (const auto& [category, counts] : summary.by_category) {
    CHECK(counts.improved <= counts.eligible_low);
    CHECK(counts.regressed <= counts.eligible_high);
    cells += counts.eligible_low + counts.eligible_high;
  }
  CHECK(cells == static_cast<long>(summary.cells.size()));
  CHECK(cells == summary.overall.eligible_low + summary.overall.eligible_high);

  // Likert-scored baseline, step 80 -> 543.
  const std::vector<CategoryPlan> likert_plan = {
      {"Task Completion", 31, 7, 38, 7},
      {"Observable Quality", 65, 21, 61, 9},
      {"General Reasoning", 20, 6, 8, 1},
  };
  std::vector<analyzer::PoolRecord> likert_early, likert_final;
  build_transition_slices(likert_plan, "likert", 80, 543, likert_early, likert_final);
  const analyzer::TransitionSummary likert =
      analyzer::criterion_transitions(likert_early, likert_final, 0.5);
  CHECK(pct(likert.by_category.at("Task Completion").improved, 31) == "22.6");
  CHECK(pct(likert.by_category.at("Observable Quality").improved, 65) == "32.3");
  CHECK(pct(likert.by_category.at("General Reasoning").improved, 20) == "30.0");
  CHECK(pct(likert.overall.improved, likert.overall.eligible_low) == "29.3");
  CHECK(likert.overall.improved == 34);
  CHECK(likert.overall.eligible_low == 116);
  CHECK(pct(likert.by_category.at("Task Completion").regressed, 38) == "18.4");
  CHECK(pct(likert.by_category.at("Observable Quality").regressed, 61) == "14.8");
  CHECK(pct(likert.by_category.at("General Reasoning").regressed, 8) == "12.5");
  CHECK(pct(likert.overall.regressed, likert.overall.eligible_high) == "15.9");
  CHECK(likert.overall.regressed == 17);
  CHECK(likert.overall.eligible_high == 107);

  // The rendered report carries the same percentages.
  std::vector<analyzer::PoolRecord> pool = early;
  pool.insert(pool.end(), final_slice.begin(), final_slice.end());
  const analyzer::ReportFiles report = analyzer::build_report(pool);
  CHECK(report.transitions_csv.find("tbl,50,250,Task Completion,17,35,48.6,1,34,2.9") !=
        std::string::npos);
  CHECK(report.transitions_csv.find("tbl,50,250,Overall,55,110,50.0,7,113,6.2") !=
        std::string::npos);
  CHECK(report.summary_text.find("50.0%") != std::string::npos);
}

TEST_CASE("transition cells require presence in both slices and average multiple rollouts") {
  std::vector<analyzer::PoolRecord> early;
  std::vector<analyzer::PoolRecord> final_slice;
  // Two early rollouts pass 1/2 -> q_early 0.5, eligible-high at 0.5.
  early.push_back(single_criterion_record("f", 1, "p1", "c1", "Task Completion", true));
  early.push_back(single_criterion_record("f", 1, "p1", "c1", "Task Completion", false));
  // Present only in the early slice: must be ignored.
  early.push_back(single_criterion_record("f", 1, "only_early", "c1", "Task Completion", false));
  final_slice.push_back(
      single_criterion_record("f", 9, "p1", "c1", "Task Completion", false));

  const analyzer::TransitionSummary summary =
      analyzer::criterion_transitions(early, final_slice, 0.5);
  REQUIRE(summary.cells.size() == 1);
  CHECK(summary.cells[0].q_early == 0.5);
  CHECK(summary.cells[0].q_final == 0.0);
  CHECK(summary.overall.eligible_high == 1);
  CHECK(summary.overall.regressed == 1);
  CHECK(summary.overall.eligible_low == 0);

  // Boundary: q_early exactly at the threshold counts as high, and a final
  // rate exactly at the threshold is not a regression.
  std::vector<analyzer::PoolRecord> final_at;
  final_at.push_back(single_criterion_record("f", 9, "p1", "c1", "Task Completion", true));
  final_at.push_back(single_criterion_record("f", 9, "p1", "c1", "Task Completion", false));
  const analyzer::TransitionSummary at_threshold =
      analyzer::criterion_transitions(early, final_at, 0.5);
  CHECK(at_threshold.overall.regressed == 0);

  std::vector<analyzer::PoolRecord> disjoint;
  disjoint.push_back(single_criterion_record("f", 9, "p2", "c9", "Task Completion", true));
  try {
    (void)analyzer::criterion_transitions(early, disjoint, 0.5);
    FAIL("disjoint slices accepted");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::NoCommonCells);
  }
}

TEST_CASE("overlap summary groups by family and checkpoint") {
  std::vector<analyzer::PoolRecord> pool;
  auto with_overlap = [&](const std::string& family, long step, double value) {
    analyzer::PoolRecord record =
        single_criterion_record(family, step, "p" + std::to_string(pool.size()), "c",
                                "Task Completion", true);
    record.topk_overlap = value;
    pool.push_back(record);
  };
  with_overlap("a", 0, 0.25);
  with_overlap("a", 0, 0.75);
  with_overlap("a", 5, 1.0);
  with_overlap("b", 0, 0.5);
  // A record without the field stays out of every denominator.
  pool.push_back(single_criterion_record("a", 0, "bare", "c", "Task Completion", true));

  const std::vector<analyzer::OverlapStat> stats = analyzer::overlap_summary(pool);
  REQUIRE(stats.size() == 3);
  CHECK(stats[0].family == "a");
  CHECK(stats[0].checkpoint_step == 0);
  CHECK(stats[0].count == 2);
  CHECK(stats[0].mean == doctest::Approx(0.5));
  CHECK(stats[0].min == 0.25);
  CHECK(stats[0].max == 0.75);
  CHECK(stats[1].checkpoint_step == 5);
  CHECK(stats[1].count == 1);
  CHECK(stats[2].family == "b");

  std::vector<analyzer::PoolRecord> bare = {
      single_criterion_record("a", 0, "bare", "c", "Task Completion", true)};
  try {
    (void)analyzer::overlap_summary(bare);
    FAIL("overlap summary produced without the field");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::FieldAbsent);
  }
}

TEST_CASE("pool loader enforces the header and reports line numbers") {
  const fs::path dir = fs::temp_directory_path() / "ropd_analyzer_pool";
  fs::remove_all(dir);
  fs::create_directories(dir);

  const json header = {{"pool_version", analyzer::kPoolVersion},
                       {"family", "toy-full"},
                       {"config_hash", "deadbeef"}};
  const json good = analyzer::to_json(
      single_criterion_record("toy-full", 0, "p0", "c0", "Task Completion", true));

  const fs::path ok_path = dir / "ok.jsonl";
  {
    std::ofstream out(ok_path);
    out << header.dump() << "\n" << good.dump() << "\n";
  }
  const auto records = analyzer::load_pool(ok_path.string());
  REQUIRE(records.size() == 1);
  CHECK(records[0].prompt_id == "p0");
  CHECK(records[0].rubric_reward == 0.9);

  // Unknown fields survive the round trip through `extra`.
  json extended = good;
  extended["response_text"] = "2 5 7 #";
  const analyzer::PoolRecord with_extra = analyzer::pool_record_from_json(extended);
  CHECK(with_extra.extra.at("response_text") == "2 5 7 #");
  CHECK(analyzer::to_json(with_extra) == extended);

  auto expect_load_error = [&](const std::string& name, const std::string& content,
                               ErrorKind kind, const std::string& needle) {
    const fs::path path = dir / name;
    std::ofstream(path) << content;
    try {
      (void)analyzer::load_pool(path.string());
      FAIL("loaded ", name);
    } catch (const Error& e) {
      CHECK(e.kind() == kind);
      CHECK_MESSAGE(std::string(e.what()).find(needle) != std::string::npos, e.what());
    }
  };

  expect_load_error("no_header.jsonl", good.dump() + "\n", ErrorKind::MalformedRecord,
                    "pool_version");
  expect_load_error("empty.jsonl", "", ErrorKind::EmptyPool, "empty");
  expect_load_error("header_only.jsonl", header.dump() + "\n", ErrorKind::EmptyPool,
                    "no records");
  json bad_reward = good;
  bad_reward["rubric_reward"] = 1.5;
  expect_load_error("bad_reward.jsonl", header.dump() + "\n" + bad_reward.dump() + "\n",
                    ErrorKind::MalformedRecord, ":2");
  json bad_judgements = good;
  bad_judgements["judgements"] = json::array({true, "nope"});
  expect_load_error("bad_judgements.jsonl",
                    header.dump() + "\n" + good.dump() + "\n" + bad_judgements.dump() + "\n",
                    ErrorKind::MalformedRecord, ":3");
  json ragged = good;
  ragged["categories"] = json::array({"Task Completion", "Observable Quality"});
  expect_load_error("ragged.jsonl", header.dump() + "\n" + ragged.dump() + "\n",
                    ErrorKind::MalformedRecord, "disagree");
}

TEST_CASE("report rendering degrades gracefully instead of throwing") {
  // Single correctness class, no overlap field, one checkpoint.
  std::vector<analyzer::PoolRecord> pool = {
      single_criterion_record("solo", 0, "p0", "c0", "Task Completion", true),
      single_criterion_record("solo", 0, "p1", "c0", "Task Completion", true)};
  const analyzer::ReportFiles files = analyzer::build_report(pool);
  CHECK(files.alignment_csv.find("NA") != std::string::npos);
  CHECK(files.summary_text.find("single correctness class") != std::string::npos);
  CHECK(files.summary_text.find("fewer than two checkpoints") != std::string::npos);
  CHECK(files.summary_text.find("topk_overlap is absent") != std::string::npos);

  const fs::path dir = fs::temp_directory_path() / "ropd_analyzer_report";
  fs::remove_all(dir);
  fs::create_directories(dir);
  analyzer::write_report(files, dir.string());
  for (const char* name :
       {"alignment.csv", "category_rates.csv", "transitions.csv", "overlap.csv",
        "summary.txt"}) {
    CHECK_MESSAGE(fs::exists(dir / name), name);
  }

  // Byte stability: the same pool renders the same bytes.
  const analyzer::ReportFiles again = analyzer::build_report(pool);
  CHECK(again.summary_text == files.summary_text);
  CHECK(again.alignment_csv == files.alignment_csv);
}
