#include "ropd/analyzer/metrics.hpp"

#include <algorithm>
#include <map>
#include <tuple>
#include <utility>

#include "ropd/error.hpp"

namespace ropd::analyzer {

PairCounts pair_counts(const std::vector<double>& scores, const std::vector<bool>& labels) {
  if (scores.size() != labels.size()) {
    throw Error(ErrorKind::LengthMismatch,
                std::to_string(scores.size()) + " scores against " +
                    std::to_string(labels.size()) + " labels");
  }
  PairCounts counts;
  for (const bool label : labels) {
    if (label) ++counts.positives; else ++counts.negatives;
  }
  if (counts.positives == 0 || counts.negatives == 0) {
    throw Error(ErrorKind::SingleClass,
                "pair statistics need both correct and incorrect responses (got " +
                    std::to_string(counts.positives) + " / " +
                    std::to_string(counts.negatives) + ")");
  }

  std::vector<std::pair<double, bool>> ranked(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) ranked[i] = {scores[i], labels[i]};
  std::sort(ranked.begin(), ranked.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });

  long long pos_below = 0;
  long long neg_below = 0;
  std::size_t i = 0;
  while (i < ranked.size()) {
    std::size_t j = i;
    long long pos_here = 0;
    long long neg_here = 0;
    while (j < ranked.size() && ranked[j].first == ranked[i].first) {
      if (ranked[j].second) ++pos_here; else ++neg_here;
      ++j;
    }
    counts.wins += pos_here * neg_below;    // correct strictly above incorrect
    counts.losses += neg_here * pos_below;  // incorrect strictly above correct
    counts.ties += pos_here * neg_here;
    pos_below += pos_here;
    neg_below += neg_here;
    i = j;
  }
  return counts;
}

double alignment_auc(const std::vector<double>& scores, const std::vector<bool>& labels) {
  const PairCounts counts = pair_counts(scores, labels);
  return (static_cast<double>(counts.wins) + 0.5 * static_cast<double>(counts.ties)) /
         static_cast<double>(counts.pairs());
}

double preference_conflict_rate(const std::vector<double>& scores,
                                const std::vector<bool>& labels) {
  const PairCounts counts = pair_counts(scores, labels);
  return static_cast<double>(counts.losses) / static_cast<double>(counts.pairs());
}

double tie_rate(const std::vector<double>& scores, const std::vector<bool>& labels) {
  const PairCounts counts = pair_counts(scores, labels);
  return 0.5 * static_cast<double>(counts.ties) / static_cast<double>(counts.pairs());
}

namespace {

struct CellTally {
  std::string category;
  long pass = 0;
  long total = 0;
};

using CellKey = std::pair<std::string, std::string>;  // (prompt_id, criterion_id)

std::map<CellKey, CellTally> tally_cells(const std::vector<PoolRecord>& slice) {
  std::map<CellKey, CellTally> cells;
  for (const PoolRecord& record : slice) {
    if (!record.judgements) continue;
    const std::size_t k_count = record.judgements->size();
    for (std::size_t k = 0; k < k_count; ++k) {
      std::string criterion_id = record.criterion_ids && k < record.criterion_ids->size()
                                     ? (*record.criterion_ids)[k]
                                     : "k" + std::to_string(k);
      CellTally& tally = cells[{record.prompt_id, std::move(criterion_id)}];
      if (tally.total == 0 && record.categories && k < record.categories->size()) {
        tally.category = (*record.categories)[k];
      }
      tally.total += 1;
      if ((*record.judgements)[k]) tally.pass += 1;
    }
  }
  return cells;
}

}  // namespace

TransitionSummary criterion_transitions(const std::vector<PoolRecord>& early,
                                        const std::vector<PoolRecord>& final_slice,
                                        double threshold) {
  const std::map<CellKey, CellTally> early_cells = tally_cells(early);
  const std::map<CellKey, CellTally> final_cells = tally_cells(final_slice);

  TransitionSummary summary;
  for (const auto& [key, early_tally] : early_cells) {
    const auto it = final_cells.find(key);
    if (it == final_cells.end()) continue;
    const CellTally& final_tally = it->second;

    TransitionCell cell;
    cell.prompt_id = key.first;
    cell.criterion_id = key.second;
    cell.category = early_tally.category.empty() ? final_tally.category : early_tally.category;
    cell.q_early = static_cast<double>(early_tally.pass) / static_cast<double>(early_tally.total);
    cell.q_final = static_cast<double>(final_tally.pass) / static_cast<double>(final_tally.total);
    summary.cells.push_back(cell);

    TransitionCounts& category_counts = summary.by_category[cell.category];
    for (TransitionCounts* counts : {&category_counts, &summary.overall}) {
      if (cell.q_early < threshold) {
        counts->eligible_low += 1;
        if (cell.q_final >= threshold) counts->improved += 1;
      } else {
        counts->eligible_high += 1;
        if (cell.q_final < threshold) counts->regressed += 1;
      }
    }
  }
  if (summary.cells.empty()) {
    throw Error(ErrorKind::NoCommonCells,
                "early and final slices share no (prompt, criterion) cells");
  }
  return summary;
}

std::vector<OverlapStat> overlap_summary(const std::vector<PoolRecord>& pool) {
  std::map<std::pair<std::string, long>, OverlapStat> groups;
  for (const PoolRecord& record : pool) {
    if (!record.topk_overlap) continue;
    const double v = *record.topk_overlap;
    auto [it, inserted] =
        groups.try_emplace({record.family, record.checkpoint_step});
    OverlapStat& stat = it->second;
    if (inserted) {
      stat.family = record.family;
      stat.checkpoint_step = record.checkpoint_step;
      stat.min = v;
      stat.max = v;
    }
    stat.count += 1;
    stat.mean += v;  // running sum until the final division
    stat.min = std::min(stat.min, v);
    stat.max = std::max(stat.max, v);
  }
  if (groups.empty()) {
    throw Error(ErrorKind::FieldAbsent, "no record carries topk_overlap");
  }
  std::vector<OverlapStat> out;
  out.reserve(groups.size());
  for (auto& [key, stat] : groups) {
    stat.mean /= static_cast<double>(stat.count);
    out.push_back(stat);
  }
  return out;
}

}  // namespace ropd::analyzer
