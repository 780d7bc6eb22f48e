#pragma once

// Column names as token/delimiter sequences, per-token expansion rules, and
// the E2 ("expansion & explanation") record that ties them together.
//
// Tokenization is never computed here. The generator receives tokens from the
// LLM; this header only checks that what came back is well formed.

#include <array>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "colexpand/errors.hpp"

namespace colexpand {

// Separators that may appear between two tokens. The empty string covers
// camel-case boundaries such as "eSal".
inline constexpr std::array<std::string_view, 5> kDelimiters = {"_", "-", " ", ".", ""};

bool is_allowed_delimiter(std::string_view d) noexcept;

// An abbreviated column name exactly as it appears in the schema.
class ColumnName {
 public:
  // Throws ValidationError when raw is empty after trimming.
  explicit ColumnName(std::string raw);

  const std::string& raw() const noexcept { return raw_; }

  friend bool operator==(const ColumnName&, const ColumnName&) = default;
  friend auto operator<=>(const ColumnName&, const ColumnName&) = default;

 private:
  std::string raw_;
};

struct TokenSequence {
  std::vector<std::string> tokens;
  std::vector<std::string> delimiters;  // tokens.size() - 1 entries

  // Interleaves tokens and delimiters. Does not validate.
  std::string reconstruct() const;

  friend bool operator==(const TokenSequence&, const TokenSequence&) = default;
};

struct ExpansionRule {
  std::string token;
  std::string expansion;

  friend bool operator==(const ExpansionRule&, const ExpansionRule&) = default;
};

struct E2Record {
  std::string table_name;
  ColumnName column;
  TokenSequence token_sequence;
  std::vector<ExpansionRule> rules;
  std::string expansion;
  // Set when the generator gave up on the LLM and emitted the identity record.
  bool fallback = false;

  friend bool operator==(const E2Record&, const E2Record&) = default;
};

struct TableSchema {
  std::string name;
  std::vector<ColumnName> columns;
  std::optional<std::string> summary;

  friend bool operator==(const TableSchema&, const TableSchema&) = default;
};

struct TableGroup {
  std::string id;
  std::string summary;
  std::vector<std::string> members;

  friend bool operator==(const TableGroup&, const TableGroup&) = default;
};

// True iff the sequence is well formed (non-empty tokens, allowed delimiters,
// one delimiter between each pair of tokens) and rebuilds column.raw exactly.
bool validate_token_sequence(const ColumnName& column, const TokenSequence& seq);

// Case-insensitive subsequence test: every character of token occurs in
// expansion, in order. Spaces in the expansion are skipped like any other
// character.
bool is_valid_expansion(std::string_view token, std::string_view expansion);

bool is_numeric_token(std::string_view token) noexcept;

// is_valid_expansion plus the rule that digit-only tokens map to themselves.
bool is_acceptable_rule(const ExpansionRule& rule);

// Joins rule expansions with single spaces.
std::string join_expansions(std::span<const ExpansionRule> rules);

// Stores and returns the joined expansion. Throws AlignmentError when the
// rules are not one-per-token in token order.
std::string assemble_expansion(E2Record& record);

// Every invariant violation found in record; empty means the record is valid.
// Covers token reconstruction, rule alignment, subsequence and numeric rules,
// the assembled expansion, and conflicting expansions of one token within the
// same column.
std::vector<std::string> record_violations(const E2Record& record);

inline bool is_valid_record(const E2Record& record) { return record_violations(record).empty(); }

// Aligns LLM-proposed tokens against the raw column name. Tokens are matched
// case-insensitively but the returned sequence uses the raw spelling, so the
// result always reconstructs raw exactly. Between consecutive tokens at most
// one delimiter character is accepted; the empty delimiter is tried first.
// Returns nullopt when the tokens do not cover raw.
std::optional<TokenSequence> align_tokens(const ColumnName& column,
                                          const std::vector<std::string>& tokens);

// Record in which the whole column name is one token that expands to itself.
// Used when the LLM cannot produce a valid record.
E2Record identity_record(const std::string& table_name, const ColumnName& column);

// Throws ValidationError when name is empty or column names repeat.
void validate_table(const TableSchema& table);

}  // namespace colexpand
