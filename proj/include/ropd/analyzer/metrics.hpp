#pragma once

#include <map>
#include <string>
#include <vector>

#include "ropd/analyzer/pool.hpp"

namespace ropd::analyzer {

/// Exact integer pair statistics between correct (positive) and incorrect
/// (negative) scores. wins + ties + losses == positives * negatives.
struct PairCounts {
  long long wins = 0;    // correct scored strictly above incorrect
  long long ties = 0;    // equal scores across classes
  long long losses = 0;  // incorrect scored strictly above correct
  long long positives = 0;
  long long negatives = 0;

  long long pairs() const { return positives * negatives; }
};

// O(n log n) sort-and-sweep; equivalent to enumerating all cross-class
// pairs. Throws LengthMismatch on ragged input, SingleClass when either
// class is empty.
PairCounts pair_counts(const std::vector<double>& scores, const std::vector<bool>& labels);

// Rank AUC with ties credited 0.5: (wins + ties/2) / pairs.
double alignment_auc(const std::vector<double>& scores, const std::vector<bool>& labels);

// Fraction of cross-class pairs where the incorrect response scores
// strictly higher; ties excluded from the numerator.
double preference_conflict_rate(const std::vector<double>& scores,
                                const std::vector<bool>& labels);

// Half the tied-pair fraction, i.e. the AUC credit that came from ties.
double tie_rate(const std::vector<double>& scores, const std::vector<bool>& labels);

/// Per-(prompt, criterion) pass rates in the early and final slices.
struct TransitionCell {
  std::string prompt_id;
  std::string criterion_id;
  std::string category;
  double q_early = 0.0;
  double q_final = 0.0;

  bool operator==(const TransitionCell&) const = default;
};

struct TransitionCounts {
  long improved = 0;
  long eligible_low = 0;  // cells with q_early < threshold
  long regressed = 0;
  long eligible_high = 0;  // cells with q_early >= threshold
};

struct TransitionSummary {
  std::map<std::string, TransitionCounts> by_category;
  TransitionCounts overall;
  std::vector<TransitionCell> cells;  // sorted by (prompt_id, criterion_id)
};

// improved: q_early < threshold and q_final >= threshold, out of the
// eligible-low cells; regressed symmetric over the eligible-high cells.
// Cells are the (prompt, criterion) pairs present in both slices; throws
// NoCommonCells when the slices share none.
TransitionSummary criterion_transitions(const std::vector<PoolRecord>& early,
                                        const std::vector<PoolRecord>& final_slice,
                                        double threshold = 0.5);

struct OverlapStat {
  std::string family;
  long checkpoint_step = 0;
  long count = 0;
  double mean = 0.0;
  double min = 0.0;
  double max = 0.0;
};

// Per-(family, checkpoint_step) summary of topk_overlap over the records
// carrying the field; records without it leave the denominator. Throws
// FieldAbsent when no record carries it.
std::vector<OverlapStat> overlap_summary(const std::vector<PoolRecord>& pool);

}  // namespace ropd::analyzer
