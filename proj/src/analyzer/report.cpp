#include "ropd/analyzer/report.hpp"

#include <array>
#include <cstdio>
#include <filesystem>
#include <map>
#include <sstream>
#include <vector>

#include "ropd/analyzer/metrics.hpp"
#include "ropd/error.hpp"
#include "ropd/util/fs.hpp"

namespace ropd::analyzer {

namespace {

std::string fixed(double value, int digits) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.*f", digits, value);
  return buf;
}

std::string percent_cell(long count, long eligible) {
  if (eligible <= 0) return "NA";
  return fixed(100.0 * static_cast<double>(count) / static_cast<double>(eligible), 1);
}

std::string ratio_text(long count, long eligible) {
  if (eligible <= 0) return "0/0 (NA)";
  return std::to_string(count) + "/" + std::to_string(eligible) + " (" +
         percent_cell(count, eligible) + "%)";
}

struct AlignmentCells {
  std::string auc = "NA";
  std::string conflict = "NA";
  std::string tie = "NA";
  long long positives = 0;
  long long negatives = 0;
};

AlignmentCells alignment_cells(const std::vector<const PoolRecord*>& records) {
  std::vector<double> scores;
  std::vector<bool> labels;
  scores.reserve(records.size());
  labels.reserve(records.size());
  for (const PoolRecord* record : records) {
    scores.push_back(record->rubric_reward);
    labels.push_back(record->correct);
  }
  AlignmentCells cells;
  for (const bool label : labels) {
    if (label) ++cells.positives; else ++cells.negatives;
  }
  try {
    const PairCounts counts = pair_counts(scores, labels);
    const double pairs = static_cast<double>(counts.pairs());
    cells.auc = fixed((static_cast<double>(counts.wins) + 0.5 * counts.ties) / pairs, 6);
    cells.conflict = fixed(static_cast<double>(counts.losses) / pairs, 6);
    cells.tie = fixed(0.5 * static_cast<double>(counts.ties) / pairs, 6);
  } catch (const Error& err) {
    if (err.kind() != ErrorKind::SingleClass) throw;
  }
  return cells;
}

}  // namespace

ReportFiles build_report(const std::vector<PoolRecord>& pool, const ReportOptions& options) {
  std::map<std::string, std::vector<const PoolRecord*>> by_family;
  for (const PoolRecord& record : pool) by_family[record.family].push_back(&record);

  std::vector<std::string> notices;
  std::ostringstream summary;
  summary << "reward-signal summary\n=====================\n";
  summary << "records: " << pool.size() << " across " << by_family.size() << " families\n";

  // Alignment between rubric reward and the correctness oracle.
  std::ostringstream alignment;
  alignment << "family,checkpoint_step,n_correct,n_incorrect,auc,conflict_rate,tie_rate\n";
  summary << "\n[alignment: rubric reward vs oracle correctness]\n";
  for (const auto& [family, records] : by_family) {
    std::map<long, std::vector<const PoolRecord*>> by_step;
    for (const PoolRecord* record : records) by_step[record->checkpoint_step].push_back(record);
    for (const auto& [step, slice] : by_step) {
      const AlignmentCells cells = alignment_cells(slice);
      alignment << family << ',' << step << ',' << cells.positives << ',' << cells.negatives
                << ',' << cells.auc << ',' << cells.conflict << ',' << cells.tie << '\n';
    }
    const AlignmentCells cells = alignment_cells(records);
    alignment << family << ",all," << cells.positives << ',' << cells.negatives << ','
              << cells.auc << ',' << cells.conflict << ',' << cells.tie << '\n';
    summary << family << " (all checkpoints): AUC " << cells.auc << " | conflict "
            << cells.conflict << " | ties " << cells.tie << " | " << cells.positives
            << " correct / " << cells.negatives << " incorrect\n";
    if (cells.auc == "NA") {
      notices.push_back("family " + family +
                        " has a single correctness class; alignment metrics are NA");
    }
  }

  // Unweighted judgement pass rates per category.
  std::ostringstream category_rates;
  category_rates << "family,checkpoint_step,category,judged,pass_rate\n";
  bool any_judgements = false;
  for (const auto& [family, records] : by_family) {
    std::map<std::pair<long, std::string>, std::pair<long, long>> tallies;  // (pass, total)
    for (const PoolRecord* record : records) {
      if (!record->judgements) continue;
      any_judgements = true;
      for (std::size_t k = 0; k < record->judgements->size(); ++k) {
        std::string category = record->categories && k < record->categories->size()
                                   ? (*record->categories)[k]
                                   : "Uncategorized";
        auto& tally = tallies[{record->checkpoint_step, std::move(category)}];
        tally.second += 1;
        if ((*record->judgements)[k]) tally.first += 1;
      }
    }
    for (const auto& [key, tally] : tallies) {
      category_rates << family << ',' << key.first << ',' << key.second << ',' << tally.second
                     << ','
                     << fixed(static_cast<double>(tally.first) / static_cast<double>(tally.second),
                              6)
                     << '\n';
    }
  }
  if (!any_judgements) {
    notices.push_back("no record carries judgements; category rate table is empty");
  }

  // Early-to-final criterion transitions.
  std::ostringstream transitions;
  transitions << "family,early_step,final_step,category,improved,eligible_low,improved_pct,"
                 "regressed,eligible_high,regressed_pct\n";
  summary << "\n[criterion transitions: threshold " << fixed(options.transition_threshold, 2)
          << ", early -> final]\n";
  for (const auto& [family, records] : by_family) {
    std::map<long, std::vector<PoolRecord>> by_step;
    for (const PoolRecord* record : records) by_step[record->checkpoint_step].push_back(*record);
    if (by_step.size() < 2) {
      notices.push_back("family " + family +
                        " has fewer than two checkpoints; transition analysis skipped");
      continue;
    }
    const long early_step = by_step.begin()->first;
    const long final_step = by_step.rbegin()->first;
    try {
      const TransitionSummary result = criterion_transitions(
          by_step.begin()->second, by_step.rbegin()->second, options.transition_threshold);
      summary << family << " (step " << early_step << " -> " << final_step << "):\n";
      auto emit = [&](const std::string& category, const TransitionCounts& counts) {
        transitions << family << ',' << early_step << ',' << final_step << ',' << category
                    << ',' << counts.improved << ',' << counts.eligible_low << ','
                    << percent_cell(counts.improved, counts.eligible_low) << ','
                    << counts.regressed << ',' << counts.eligible_high << ','
                    << percent_cell(counts.regressed, counts.eligible_high) << '\n';
        summary << "  " << category << ": improved "
                << ratio_text(counts.improved, counts.eligible_low) << ", regressed "
                << ratio_text(counts.regressed, counts.eligible_high) << '\n';
      };
      for (const auto& [category, counts] : result.by_category) {
        emit(category.empty() ? "Uncategorized" : category, counts);
      }
      emit("Overall", result.overall);
    } catch (const Error& err) {
      if (err.kind() != ErrorKind::NoCommonCells) throw;
      notices.push_back("family " + family +
                        " shares no judged (prompt, criterion) cells between first and last "
                        "checkpoint; transition analysis skipped");
    }
  }

  // Top-k support overlap against the reference policy.
  std::ostringstream overlap;
  overlap << "family,checkpoint_step,count,mean,min,max\n";
  summary << "\n[top-k support overlap vs reference]\n";
  try {
    for (const OverlapStat& stat : overlap_summary(pool)) {
      overlap << stat.family << ',' << stat.checkpoint_step << ',' << stat.count << ','
              << fixed(stat.mean, 6) << ',' << fixed(stat.min, 6) << ',' << fixed(stat.max, 6)
              << '\n';
      summary << stat.family << " step " << stat.checkpoint_step << ": mean "
              << fixed(stat.mean, 6) << " min " << fixed(stat.min, 6) << " max "
              << fixed(stat.max, 6) << " over " << stat.count << " rollouts\n";
    }
  } catch (const Error& err) {
    if (err.kind() != ErrorKind::FieldAbsent) throw;
    summary << "(none)\n";
    notices.push_back("topk_overlap is absent from every record; overlap table omitted");
  }

  summary << "\n[notes]\n";
  summary << "- Preference conflict counts only strictly reversed pairs (incorrect scored "
             "above correct); tied pairs are excluded from its numerator, so the conflict "
             "rate and 1 - AUC differ whenever ties occur.\n";
  for (const std::string& notice : notices) summary << "- " << notice << '\n';

  ReportFiles files;
  files.alignment_csv = alignment.str();
  files.category_rates_csv = category_rates.str();
  files.transitions_csv = transitions.str();
  files.overlap_csv = overlap.str();
  files.summary_text = summary.str();
  return files;
}

void write_report(const ReportFiles& files, const std::string& out_dir) {
  const std::filesystem::path dir(out_dir);
  util::atomic_write_file(dir / "alignment.csv", files.alignment_csv);
  util::atomic_write_file(dir / "category_rates.csv", files.category_rates_csv);
  util::atomic_write_file(dir / "transitions.csv", files.transitions_csv);
  util::atomic_write_file(dir / "overlap.csv", files.overlap_csv);
  util::atomic_write_file(dir / "summary.txt", files.summary_text);
}

}  // namespace ropd::analyzer
