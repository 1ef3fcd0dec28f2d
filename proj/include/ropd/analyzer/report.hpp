#pragma once

#include <string>
#include <vector>

#include "ropd/analyzer/pool.hpp"

namespace ropd::analyzer {

struct ReportOptions {
  double transition_threshold = 0.5;
};

/// Rendered report artifacts; byte-stable for identical pools.
struct ReportFiles {
  std::string alignment_csv;
  std::string category_rates_csv;
  std::string transitions_csv;
  std::string overlap_csv;
  std::string summary_text;
};

// Degenerate groups (single class, no judgements, missing overlaps) render
// as NA cells or omitted tables with a notice; nothing throws.
ReportFiles build_report(const std::vector<PoolRecord>& pool, const ReportOptions& options = {});

// alignment.csv, transitions.csv, overlap.csv, summary.txt under out_dir.
void write_report(const ReportFiles& files, const std::string& out_dir);

}  // namespace ropd::analyzer
