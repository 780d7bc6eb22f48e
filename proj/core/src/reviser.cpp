#include "colexpand/reviser.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include "colexpand/parallel.hpp"
#include "colexpand/summarizer.hpp"
#include "colexpand/text.hpp"

namespace colexpand {

namespace {

std::string expansion_key(std::string_view e) { return text::to_lower(text::collapse_whitespace(e)); }

constexpr std::string_view kDecisionReminder =
    "Your previous reply did not end with a valid decision line. End your reply with exactly one "
    "final line: DECISION: UNIQUE | <expansion> or DECISION: NOT UNIQUE";

}  // namespace

std::size_t RuleIndex::total_frequency(const std::string& token) const {
  auto it = entries.find(token);
  if (it == entries.end()) return 0;
  std::size_t total = 0;
  for (const auto& s : it->second) total += s.frequency;
  return total;
}

RuleIndex build_rule_index(const std::vector<E2Record>& records) {
  RuleIndex index;
  // (token, expansion key) pairs already counted for the current column
  for (const auto& rec : records) {
    std::set<std::pair<std::string, std::string>> counted;
    for (const auto& rule : rec.rules) {
      const auto token = text::to_lower(rule.token);
      const auto key = expansion_key(rule.expansion);
      if (!counted.emplace(token, key).second) continue;
      auto& stats = index.entries[token];
      auto it = std::find_if(stats.begin(), stats.end(),
                             [&](const RuleStat& s) { return expansion_key(s.expansion) == key; });
      if (it == stats.end()) {
        stats.push_back({text::collapse_whitespace(rule.expansion), 1, rec.table_name, rec.column.raw()});
      } else {
        ++it->frequency;
      }
    }
  }
  return index;
}

std::vector<std::string> select_candidates(const RuleIndex& index, std::size_t min_token_length) {
  std::vector<std::string> out;
  for (const auto& [token, stats] : index.entries)
    if (stats.size() >= 2 && token.size() >= min_token_length) out.push_back(token);
  std::stable_sort(out.begin(), out.end(), [&](const std::string& a, const std::string& b) {
    return index.total_frequency(a) > index.total_frequency(b);
  });
  return out;
}

std::optional<Decision> parse_decision(std::string_view reply) {
  std::istringstream in{std::string(reply)};
  std::string line, last;
  while (std::getline(in, line)) {
    std::string s;
    for (char c : line)
      if (c != '*' && c != '`') s.push_back(c);
    s = text::trim(s);
    if (text::istarts_with(s, "DECISION:")) last = text::trim(std::string_view(s).substr(9));
  }
  if (last.empty()) return std::nullopt;

  const auto upper_prefix = [&](std::string_view p) { return text::istarts_with(last, p); };
  if (upper_prefix("NOT UNIQUE")) return Decision{Decision::Kind::not_unique, {}};
  if (upper_prefix("UNIQUE")) {
    auto rest = text::trim(std::string_view(last).substr(6));
    if (rest.empty() || rest.front() != '|') return std::nullopt;
    auto expansion = text::collapse_whitespace(std::string_view(rest).substr(1));
    if (expansion.size() >= 2 && expansion.front() == '"' && expansion.back() == '"')
      expansion = expansion.substr(1, expansion.size() - 2);
    if (expansion.empty()) return std::nullopt;
    return Decision{Decision::Kind::unique, expansion};
  }
  return std::nullopt;
}

RenderedPrompt build_reviser_prompt(const std::string& token, const std::vector<RuleStat>& stats,
                                    const std::vector<TableGroup>& groups,
                                    const std::map<std::string, const TableSchema*>& tables_by_name,
                                    const ReviserConfig& config, const PromptTemplate& tmpl) {
  std::string summaries;
  if (config.context_enabled) {
    // Sorted so the prompt does not depend on the order tables were batched in.
    std::set<std::string> distinct;
    for (const auto& g : groups) distinct.insert(g.summary);
    for (const auto& s : distinct) summaries += "- " + s + "\n";
  }
  if (summaries.empty()) summaries = "(not available)\n";

  std::string expansions;
  for (const auto& s : stats) {
    expansions += "- \"" + s.expansion + "\" used in " + std::to_string(s.frequency) + " column name" +
                  (s.frequency == 1 ? "" : "s");
    auto it = tables_by_name.find(s.sample_table);
    if (it != tables_by_name.end()) {
      const auto& table = *it->second;
      if (config.table_names_enabled) {
        expansions += ", for example in table " + render_table_line(table);
      } else {
        std::string cols;
        for (std::size_t i = 0; i < table.columns.size(); ++i)
          cols += (i ? ", " : "") + table.columns[i].raw();
        expansions += ", for example in a table with columns (" + cols + ")";
        if (config.context_enabled && table.summary) expansions += " described as: " + *table.summary;
      }
    }
    expansions += " (column " + s.sample_column + ")\n";
  }

  return render(tmpl, {{"group_summaries", summaries}, {"token", token}, {"expansions", expansions}});
}

std::optional<std::pair<std::string, std::string>> adjudicate(
    const std::string& token, const std::vector<RuleStat>& stats, const std::vector<TableGroup>& groups,
    const std::map<std::string, const TableSchema*>& tables_by_name, LlmGateway& gateway,
    const ReviserConfig& config, const PromptTemplate& tmpl) {
  const auto prompt = build_reviser_prompt(token, stats, groups, tables_by_name, config, tmpl);
  CompletionRequest request{prompt.system, prompt.user, 0.0, 6000, config.model_id};

  std::optional<Decision> decision;
  for (int attempt = 0; attempt < 2 && !decision; ++attempt) {
    if (attempt == 1) request.user_text = prompt.user + "\n\n" + std::string(kDecisionReminder);
    decision = parse_decision(gateway.complete(request).text);
  }
  if (!decision || decision->kind == Decision::Kind::not_unique) return std::nullopt;

  const auto key = expansion_key(decision->expansion);
  for (const auto& s : stats)
    if (expansion_key(s.expansion) == key && is_valid_expansion(token, s.expansion))
      return std::make_pair(token, s.expansion);
  return std::nullopt;  // not among the observed expansions
}

std::vector<E2Record> apply_unique_rules(const std::vector<E2Record>& records, const UniqueRuleSet& q_set) {
  if (q_set.empty()) return records;
  std::vector<E2Record> out = records;
  for (auto& rec : out) {
    bool touched = false;
    for (auto& rule : rec.rules) {
      auto it = q_set.rules.find(text::to_lower(rule.token));
      if (it != q_set.rules.end() && rule.expansion != it->second) {
        rule.expansion = it->second;
        touched = true;
      }
    }
    if (touched) assemble_expansion(rec);
  }
  return out;
}

ReviserResult run_reviser(const std::vector<E2Record>& records, const std::vector<TableGroup>& groups,
                          const std::vector<TableSchema>& schemas, LlmGateway& gateway,
                          const ReviserConfig& config, const PromptTemplate& tmpl) {
  std::map<std::string, const TableSchema*> by_name;
  for (const auto& t : schemas) by_name.emplace(t.name, &t);

  const auto index = build_rule_index(records);
  auto candidates = select_candidates(index, std::max<std::size_t>(config.min_token_length, 1));
  if (config.max_candidates && candidates.size() > config.max_candidates)
    candidates.resize(config.max_candidates);

  auto answers = parallel_map(candidates.size(), config.parallelism, [&](std::size_t i) {
    const auto& token = candidates[i];
    return adjudicate(token, index.entries.at(token), groups, by_name, gateway, config, tmpl);
  });

  ReviserResult result;
  result.adjudicated = candidates;
  for (auto& a : answers)
    if (a) result.unique_rules.rules.emplace(a->first, a->second);
  result.records = apply_unique_rules(records, result.unique_rules);
  return result;
}

}  // namespace colexpand
