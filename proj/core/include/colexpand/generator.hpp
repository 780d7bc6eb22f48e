#pragma once

// Expands column names into E2 records, p columns per LLM call.
//
// The prompt carries the target table, names and summaries of up to q peer
// tables from the same group, the nine rules, and worked examples of the
// token-by-token reasoning. Replies are parsed into E2 records and validated
// against the core model; columns that fail are re-asked once, then fall back
// to the identity record.

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "colexpand/core_model.hpp"
#include "colexpand/llm_gateway.hpp"
#include "colexpand/prompts.hpp"

namespace colexpand {

struct GeneratorConfig {
  std::size_t batch_size_p = 10;
  std::size_t context_sample_q = 100;
  std::uint64_t seed = 0;
  bool rules_enabled = true;
  bool cot_enabled = true;
  bool context_enabled = true;
  bool table_names_enabled = true;
  // Plain few-shot prompting with the baseline template: no context, table
  // name, rules or reasoning.
  bool baseline = false;
  std::size_t parallelism = 4;
  std::string model_id = std::string(kDefaultModel);
  std::vector<Exemplar> exemplars = default_exemplars();

  void validate() const;
};

class GeneratorError : public Error {
 public:
  GeneratorError(const std::string& message, std::vector<E2Record> partial)
      : Error(message), partial_(std::move(partial)) {}
  // Records from the batches that did complete, in output order.
  const std::vector<E2Record>& partial() const noexcept { return partial_; }

 private:
  std::vector<E2Record> partial_;
};

struct GeneratorResult {
  std::vector<E2Record> records;
  std::size_t fallback_count = 0;
  std::vector<std::string> flagged;  // "table.column" of identity fallbacks
};

// Peer context for one table. Empty when context is disabled. Peers are the
// other members of the group, ordered by name; if there are more than q, a
// seeded sample of q is kept. The sample depends only on the seed, the table
// name and the peer set, not on processing order.
std::string build_context(const TableSchema& table, const TableGroup* group,
                          const std::map<std::string, const TableSchema*>& tables_by_name,
                          const GeneratorConfig& config);

// Peer names chosen by build_context, exposed for tests.
std::vector<std::string> sample_peers(const TableSchema& table, const TableGroup& group,
                                      const GeneratorConfig& config);

RenderedPrompt build_generator_prompt(const TableSchema& table, std::span<const ColumnName> columns,
                                      const std::string& context, const GeneratorConfig& config,
                                      const TemplateSet& templates);

// One block of a reasoning-style reply.
struct ParsedColumn {
  std::string column;
  std::vector<std::string> tokens;
  std::vector<ExpansionRule> rules;
  std::optional<std::string> expansion;
};

// COLUMN:/TOKENS:/RULE:/EXPANSION: blocks keyed by column name.
std::map<std::string, ParsedColumn> parse_cot_reply(std::string_view reply);
// "<column> => <expansion>" lines keyed by column name.
std::map<std::string, std::string> parse_direct_reply(std::string_view reply);

// Builds a record from a reasoning block, or returns the reasons it cannot.
struct BuildOutcome {
  std::optional<E2Record> record;
  std::vector<std::string> problems;
};
BuildOutcome record_from_cot(const std::string& table, const ColumnName& column, const ParsedColumn& parsed);

// Builds a record from a bare expansion. Tokens are the pieces between
// explicit delimiter characters; the expansion's words are split over them so
// each token is a subsequence of its share.
BuildOutcome record_from_direct(const std::string& table, const ColumnName& column,
                                const std::string& expansion);

struct BatchOutcome {
  std::vector<E2Record> records;  // one per input column, input order
  std::size_t fallback_count = 0;
};

BatchOutcome expand_batch(const TableSchema& table, std::span<const ColumnName> columns,
                          const std::string& context, const GeneratorConfig& config,
                          LlmGateway& gateway, const TemplateSet& templates);

GeneratorResult run_generator(const std::vector<TableSchema>& schemas,
                              const std::vector<TableGroup>& groups, const GeneratorConfig& config,
                              LlmGateway& gateway, const TemplateSet& templates);

}  // namespace colexpand
