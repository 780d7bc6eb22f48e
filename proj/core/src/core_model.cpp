#include "colexpand/core_model.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <set>
#include <utility>

#include "colexpand/text.hpp"

namespace colexpand {

namespace {

char fold(char c) { return static_cast<char>(std::tolower(static_cast<unsigned char>(c))); }

bool is_delimiter_char(char c) { return c == '_' || c == '-' || c == ' ' || c == '.'; }

}  // namespace

bool is_allowed_delimiter(std::string_view d) noexcept {
  return std::find(kDelimiters.begin(), kDelimiters.end(), d) != kDelimiters.end();
}

ColumnName::ColumnName(std::string raw) : raw_(std::move(raw)) {
  if (text::trim(raw_).empty()) throw ValidationError("column name is empty");
}

std::string TokenSequence::reconstruct() const {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i > 0 && i - 1 < delimiters.size()) out += delimiters[i - 1];
    out += tokens[i];
  }
  return out;
}

bool validate_token_sequence(const ColumnName& column, const TokenSequence& seq) {
  if (seq.tokens.empty()) return false;
  if (seq.delimiters.size() + 1 != seq.tokens.size()) return false;
  for (const auto& t : seq.tokens)
    if (t.empty()) return false;
  for (const auto& d : seq.delimiters)
    if (!is_allowed_delimiter(d)) return false;
  return seq.reconstruct() == column.raw();
}

bool is_valid_expansion(std::string_view token, std::string_view expansion) {
  std::size_t i = 0;
  for (char c : expansion) {
    if (i == token.size()) break;
    if (fold(c) == fold(token[i])) ++i;
  }
  return i == token.size();
}

bool is_numeric_token(std::string_view token) noexcept { return text::is_all_digits(token); }

bool is_acceptable_rule(const ExpansionRule& rule) {
  if (rule.token.empty() || rule.expansion.empty()) return false;
  if (is_numeric_token(rule.token)) return rule.expansion == rule.token;
  return is_valid_expansion(rule.token, rule.expansion);
}

std::string join_expansions(std::span<const ExpansionRule> rules) {
  std::string out;
  for (std::size_t i = 0; i < rules.size(); ++i) {
    if (i) out.push_back(' ');
    out += rules[i].expansion;
  }
  return out;
}

std::string assemble_expansion(E2Record& record) {
  const auto& tokens = record.token_sequence.tokens;
  if (record.rules.size() != tokens.size())
    throw AlignmentError("column '" + record.column.raw() + "' has " +
                         std::to_string(tokens.size()) + " tokens but " +
                         std::to_string(record.rules.size()) + " rules");
  for (std::size_t i = 0; i < tokens.size(); ++i)
    if (record.rules[i].token != tokens[i])
      throw AlignmentError("column '" + record.column.raw() + "': rule " + std::to_string(i) +
                           " is for token '" + record.rules[i].token + "', expected '" +
                           tokens[i] + "'");
  record.expansion = join_expansions(record.rules);
  return record.expansion;
}

std::vector<std::string> record_violations(const E2Record& record) {
  std::vector<std::string> problems;
  const auto& seq = record.token_sequence;
  if (!validate_token_sequence(record.column, seq))
    problems.push_back("tokens do not rebuild column name '" + record.column.raw() + "'");

  if (record.rules.size() != seq.tokens.size()) {
    problems.push_back("expected " + std::to_string(seq.tokens.size()) + " rules, got " +
                       std::to_string(record.rules.size()));
    return problems;
  }

  std::map<std::string, std::string> seen;  // folded token -> expansion
  for (std::size_t i = 0; i < record.rules.size(); ++i) {
    const auto& rule = record.rules[i];
    if (rule.token != seq.tokens[i])
      problems.push_back("rule " + std::to_string(i) + " is for '" + rule.token +
                         "' but token is '" + seq.tokens[i] + "'");
    if (rule.expansion.empty()) {
      problems.push_back("token '" + rule.token + "' has an empty expansion");
    } else if (is_numeric_token(rule.token) && rule.expansion != rule.token) {
      problems.push_back("number '" + rule.token + "' must not be expanded");
    } else if (!is_valid_expansion(rule.token, rule.expansion)) {
      problems.push_back("'" + rule.expansion + "' does not contain the letters of '" +
                         rule.token + "' in order");
    }
    const auto key = text::to_lower(rule.token);
    const auto [it, inserted] = seen.emplace(key, text::to_lower(rule.expansion));
    if (!inserted && it->second != text::to_lower(rule.expansion))
      problems.push_back("token '" + rule.token + "' is expanded two different ways");
  }

  if (record.expansion != join_expansions(record.rules))
    problems.push_back("expansion '" + record.expansion + "' is not the join of the rules");
  return problems;
}

std::optional<TokenSequence> align_tokens(const ColumnName& column,
                                          const std::vector<std::string>& tokens) {
  const std::string& raw = column.raw();
  if (tokens.empty()) return std::nullopt;
  for (const auto& t : tokens)
    if (t.empty()) return std::nullopt;

  auto matches_at = [&](std::size_t pos, const std::string& tok) {
    return pos + tok.size() <= raw.size() &&
           text::iequals(std::string_view(raw).substr(pos, tok.size()), tok);
  };

  TokenSequence out;
  std::set<std::pair<std::size_t, std::size_t>> dead;  // (token index, position)

  // Depth-first over delimiter choices; (index, pos) pairs that failed once
  // fail again, so they are pruned.
  auto search = [&](auto&& self, std::size_t idx, std::size_t pos) -> bool {
    if (idx == tokens.size()) return pos == raw.size();
    if (dead.count({idx, pos})) return false;
    const auto& tok = tokens[idx];

    auto take = [&](std::size_t at, std::string delim) {
      if (!matches_at(at, tok)) return false;
      out.tokens.push_back(raw.substr(at, tok.size()));
      if (idx > 0) out.delimiters.push_back(std::move(delim));
      if (self(self, idx + 1, at + tok.size())) return true;
      out.tokens.pop_back();
      if (idx > 0) out.delimiters.pop_back();
      return false;
    };

    if (take(pos, "")) return true;
    if (idx > 0 && pos < raw.size() && is_delimiter_char(raw[pos]) &&
        take(pos + 1, std::string(1, raw[pos])))
      return true;
    dead.insert({idx, pos});
    return false;
  };

  if (!search(search, 0, 0)) return std::nullopt;
  return out;
}

E2Record identity_record(const std::string& table_name, const ColumnName& column) {
  E2Record rec{table_name, column, TokenSequence{{column.raw()}, {}},
               {ExpansionRule{column.raw(), column.raw()}}, column.raw(), true};
  return rec;
}

void validate_table(const TableSchema& table) {
  if (text::trim(table.name).empty()) throw ValidationError("table name is empty");
  std::set<std::string> seen;
  for (const auto& c : table.columns)
    if (!seen.insert(c.raw()).second)
      throw ValidationError("table '" + table.name + "' repeats column '" + c.raw() + "'");
}

}  // namespace colexpand
