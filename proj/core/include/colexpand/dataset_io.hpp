#pragma once

// File formats. Schemas, gold labels, groups, and E2 records are UTF-8 JSON
// Lines, one object per line; blank lines are skipped. The synonym lexicon is
// plain text with one class per line ("photo = picture"), '#' comments.

#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "colexpand/core_model.hpp"
#include "colexpand/metric_report.hpp"

namespace colexpand {

struct GoldLabel {
  std::string table_name;
  std::string column_raw;
  std::string gold_expansion;
  bool excluded = false;

  friend bool operator==(const GoldLabel&, const GoldLabel&) = default;
};

// Equivalence classes of interchangeable phrases. Phrases are stored
// normalized (lowercase, punctuation removed, single spaces). Classes are
// kept sorted, so the first phrase of a class is its lexicographically
// smallest member and serves as the canonical representative.
class SynonymLexicon {
 public:
  SynonymLexicon() = default;

  // Normalizes every phrase and unions classes that share a phrase.
  // Throws ValidationError if a class has fewer than two distinct phrases.
  static SynonymLexicon from_classes(const std::vector<std::vector<std::string>>& classes);

  // Union of both lexicons, re-merging classes that now overlap.
  SynonymLexicon merged_with(const SynonymLexicon& other) const;

  const std::vector<std::vector<std::string>>& classes() const noexcept { return classes_; }
  bool empty() const noexcept { return classes_.empty(); }

  // Class index of a normalized phrase, or -1.
  int class_of(const std::string& phrase) const;
  const std::string& representative(int class_index) const { return classes_.at(class_index).front(); }
  // Longest phrase length in words, 0 for an empty lexicon.
  std::size_t max_phrase_words() const noexcept { return max_words_; }

  friend bool operator==(const SynonymLexicon& a, const SynonymLexicon& b) {
    return a.classes_ == b.classes_;
  }

 private:
  std::vector<std::vector<std::string>> classes_;
  std::map<std::string, int> index_;
  std::size_t max_words_ = 0;
};

std::vector<TableSchema> load_schemas(const std::filesystem::path& path);
void write_schemas(const std::vector<TableSchema>& schemas, const std::filesystem::path& path);

std::vector<GoldLabel> load_gold(const std::filesystem::path& path);
void write_gold(const std::vector<GoldLabel>& labels, const std::filesystem::path& path);

SynonymLexicon load_synonyms(const std::filesystem::path& path);

std::vector<TableGroup> load_groups(const std::filesystem::path& path);
void write_groups(const std::vector<TableGroup>& groups, const std::filesystem::path& path);

// Read-back validates every record against the core model.
std::vector<E2Record> load_e2_records(const std::filesystem::path& path);
void write_e2_records(const std::vector<E2Record>& records, const std::filesystem::path& path);

void write_unique_rules(const std::map<std::string, std::string>& rules,
                        const std::filesystem::path& path);
std::map<std::string, std::string> load_unique_rules(const std::filesystem::path& path);

// JSON report: aggregates as fractions and as one-decimal percentages, plus
// per-column scores.
void write_report(const MetricReport& report, const std::filesystem::path& path);

// Single-line serializations, shared by the writers above and by tests.
std::string e2_record_to_line(const E2Record& record);
E2Record e2_record_from_line(const std::string& line);

}  // namespace colexpand
