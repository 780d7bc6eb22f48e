#pragma once

// Clusters tables into topic groups and summarizes each group and table.
//
// Tables are sent to the LLM in consecutive batches of k. Each batch comes
// back as groups with a short summary phrase, and a one-sentence summary per
// table. Groups from all batches are then merged whenever their summaries
// agree after normalization.

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "colexpand/core_model.hpp"
#include "colexpand/llm_gateway.hpp"
#include "colexpand/prompts.hpp"

namespace colexpand {

struct SummarizerConfig {
  std::size_t batch_size_k = 30;
  std::uint64_t seed = 0;
  // Shuffle the table order (with seed) before batching.
  bool shuffle_tables = false;
  std::size_t table_summary_word_cap = 40;
  std::size_t group_summary_word_cap = 12;
  std::size_t parallelism = 4;
  std::string model_id = std::string(kDefaultModel);

  void validate() const;
};

// Reply did not follow the required layout. Triggers the single retry.
class ReplyFormatError : public Error {
 public:
  using Error::Error;
};

class SummarizerError : public Error {
 public:
  using Error::Error;
};

struct BatchSummary {
  std::vector<TableGroup> groups;
  std::map<std::string, std::string> table_summaries;
};

struct SummarizerResult {
  std::vector<TableGroup> groups;
  std::vector<TableSchema> schemas;  // input order, summary filled in
  std::vector<std::string> batch_order;  // table names in the order they were batched
};

// "Name(col1, col2, ...)"
std::string render_table_line(const TableSchema& table);

// Lowercase, trim, collapse whitespace.
std::string normalize_summary(std::string_view summary);

// Keeps the first max_words words.
std::string cap_words(std::string_view s, std::size_t max_words);

RenderedPrompt build_summarizer_prompt(const std::vector<TableSchema>& batch, const PromptTemplate& tmpl);

// Parses GROUP:/TABLE: lines and checks that every batch table lands in
// exactly one group. Throws ReplyFormatError otherwise. Group ids are
// "<id_prefix>g<n>".
BatchSummary parse_summarizer_reply(std::string_view reply, const std::vector<TableSchema>& batch,
                                    const std::string& id_prefix = "");

// One LLM call, plus one re-prompt with a format reminder if the reply is
// unusable. Throws SummarizerError naming the batch's tables on the second
// failure.
BatchSummary summarize_batch(const std::vector<TableSchema>& batch, const SummarizerConfig& config,
                             LlmGateway& gateway, const PromptTemplate& tmpl,
                             const std::string& id_prefix = "");

// Unions groups whose normalized summaries are equal. Members keep their
// first-seen order; the merged group keeps the first-seen id and summary.
std::vector<TableGroup> global_merge(const std::vector<TableGroup>& groups);

// Partition into ceil(n/k) consecutive batches.
std::vector<std::vector<TableSchema>> partition_batches(const std::vector<TableSchema>& schemas,
                                                        std::size_t k);

SummarizerResult run_summarizer(const std::vector<TableSchema>& schemas, const SummarizerConfig& config,
                                LlmGateway& gateway, const PromptTemplate& tmpl);

}  // namespace colexpand
