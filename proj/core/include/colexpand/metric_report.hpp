#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace colexpand {

struct ColumnScore {
  std::string table;
  std::string column;
  std::string prediction;
  std::string gold;
  bool em = false;
  double word_f1 = 0.0;
  double embed_f1 = 0.0;
  bool syn_em = false;
  double syn_word_f1 = 0.0;
  double syn_embed_f1 = 0.0;
};

// Means over evaluated (non-excluded, matched) columns. EM values are the
// fraction of columns that match.
struct MetricAggregates {
  std::size_t columns = 0;
  double em = 0.0;
  double word_f1 = 0.0;
  double embed_f1 = 0.0;
  double syn_em = 0.0;
  double syn_word_f1 = 0.0;
  double syn_embed_f1 = 0.0;
};

struct MetricReport {
  std::string dataset;
  std::string embedder;
  std::vector<ColumnScore> per_column;
  MetricAggregates aggregates;
  std::size_t excluded = 0;   // gold labels flagged excluded
  std::size_t unmatched = 0;  // gold labels with no prediction, or predictions with no gold
};

// 0.815 -> "81.5%"
std::string format_percent(double fraction);

// Two-column text table (without / with synonyms) for terminal output.
std::string render_report_table(const MetricReport& report);

}  // namespace colexpand
