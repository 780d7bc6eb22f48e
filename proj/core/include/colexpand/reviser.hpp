#pragma once

// Lake-wide token consistency pass over E2 records.
//
// Builds an index of every token's observed expansions, asks the LLM about
// tokens with more than one expansion whether a single expansion should hold
// everywhere, and rewrites the records with the answers.

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "colexpand/core_model.hpp"
#include "colexpand/llm_gateway.hpp"
#include "colexpand/prompts.hpp"

namespace colexpand {

struct RuleStat {
  std::string expansion;  // first-seen spelling
  std::size_t frequency = 0;  // distinct (table, column) pairs using it
  std::string sample_table;
  std::string sample_column;

  friend bool operator==(const RuleStat&, const RuleStat&) = default;
};

// Keyed by case-folded token. Expansions are distinct after case-folding and
// whitespace normalization, in first-seen order.
struct RuleIndex {
  std::map<std::string, std::vector<RuleStat>> entries;

  std::size_t total_frequency(const std::string& token) const;
};

// Case-folded token -> the one expansion it must always take.
struct UniqueRuleSet {
  std::map<std::string, std::string> rules;

  bool empty() const noexcept { return rules.empty(); }
};

struct ReviserConfig {
  std::size_t min_token_length = 2;
  // 0 means no cap on the number of tokens sent for adjudication.
  std::size_t max_candidates = 0;
  bool context_enabled = true;       // include group summaries in the prompt
  bool table_names_enabled = true;   // name the sample table in the prompt
  std::size_t parallelism = 4;
  std::string model_id = std::string(kDefaultModel);
};

RuleIndex build_rule_index(const std::vector<E2Record>& records);

// Tokens with two or more expansions and at least min_token_length
// characters, by descending total frequency (ties by token).
std::vector<std::string> select_candidates(const RuleIndex& index, std::size_t min_token_length = 2);

struct Decision {
  enum class Kind { unique, not_unique };
  Kind kind;
  std::string expansion;  // set for unique
};

// Reads the last "DECISION:" line. nullopt when there is none or it is malformed.
std::optional<Decision> parse_decision(std::string_view reply);

RenderedPrompt build_reviser_prompt(const std::string& token, const std::vector<RuleStat>& stats,
                                    const std::vector<TableGroup>& groups,
                                    const std::map<std::string, const TableSchema*>& tables_by_name,
                                    const ReviserConfig& config, const PromptTemplate& tmpl);

// Asks whether token has one expansion lake-wide. Returns the rule only when
// the answer is "unique" with an expansion that is valid for the token and
// was actually observed; the observed spelling is returned. A malformed
// reply is retried once.
std::optional<std::pair<std::string, std::string>> adjudicate(
    const std::string& token, const std::vector<RuleStat>& stats, const std::vector<TableGroup>& groups,
    const std::map<std::string, const TableSchema*>& tables_by_name, LlmGateway& gateway,
    const ReviserConfig& config, const PromptTemplate& tmpl);

// Replaces every rule whose case-folded token is in q_set and reassembles the
// expansion. Records without such tokens are returned unchanged.
std::vector<E2Record> apply_unique_rules(const std::vector<E2Record>& records, const UniqueRuleSet& q_set);

struct ReviserResult {
  std::vector<E2Record> records;
  UniqueRuleSet unique_rules;
  std::vector<std::string> adjudicated;  // tokens sent to the LLM
};

ReviserResult run_reviser(const std::vector<E2Record>& records, const std::vector<TableGroup>& groups,
                          const std::vector<TableSchema>& schemas, LlmGateway& gateway,
                          const ReviserConfig& config, const PromptTemplate& tmpl);

}  // namespace colexpand
