#include "colexpand/generator.hpp"

#include <algorithm>
#include <sstream>

#include "colexpand/parallel.hpp"
#include "colexpand/sampling.hpp"
#include "colexpand/text.hpp"

namespace colexpand {

namespace {

constexpr std::string_view kCotFormat =
    "For each column name, first split it into its tokens, then expand each token, then join the "
    "token expansions into the expansion of the column name.\n"
    "Reply with one block per column name in exactly this format:\n"
    "COLUMN: <column name>\n"
    "TOKENS: <token> | <token> | ...\n"
    "RULE: <token> -> <expansion of the token>\n"
    "(one RULE line per token, in token order)\n"
    "EXPANSION: <expansion of the column name>";

constexpr std::string_view kDirectFormat =
    "Reply with one line per column name in exactly this format:\n"
    "<column name> => <expansion>";

std::string strip_decoration(std::string_view line) {
  std::string s = text::trim(line);
  while (!s.empty() && (s.front() == '-' || s.front() == '*' || s.front() == '>'))
    s = text::trim(std::string_view(s).substr(1));
  std::string out;
  for (char c : s)
    if (c != '*' && c != '`') out.push_back(c);
  return text::trim(out);
}

bool take_keyword(std::string& line, std::string_view keyword) {
  if (!text::istarts_with(line, keyword)) return false;
  line = text::trim(std::string_view(line).substr(keyword.size()));
  return true;
}

bool is_delimiter_char(char c) { return c == '_' || c == '-' || c == ' ' || c == '.'; }

std::string render_exemplars(const GeneratorConfig& config) {
  if (config.exemplars.empty()) return "";
  std::string out = "Examples:\n";
  for (const auto& ex : config.exemplars) {
    if (config.cot_enabled) {
      out += "\n";
      if (config.table_names_enabled && !ex.table.empty()) out += "Table: " + ex.table + "\n";
      out += "COLUMN: " + ex.column + "\n";
      out += "TOKENS: " + text::join(ex.tokens, " | ") + "\n";
      for (const auto& r : ex.rules) out += "RULE: " + r.token + " -> " + r.expansion + "\n";
      out += "EXPANSION: " + ex.expansion + "\n";
    } else {
      out += ex.column + " => " + ex.expansion + "\n";
    }
  }
  return out;
}

std::string render_rules() {
  std::string out = "Follow these rules:\n";
  const auto& rules = generator_rules();
  for (std::size_t i = 0; i < rules.size(); ++i) out += std::to_string(i + 1) + ". " + rules[i] + "\n";
  return out;
}

template <typename Map>
auto find_column(const Map& parsed, const std::string& raw) -> decltype(&parsed.begin()->second) {
  if (auto it = parsed.find(raw); it != parsed.end()) return &it->second;
  for (const auto& [name, value] : parsed)
    if (text::trim(name) == text::trim(raw)) return &value;
  return nullptr;
}

}  // namespace

void GeneratorConfig::validate() const {
  if (batch_size_p < 1) throw ValidationError("batch size p must be >= 1");
}

std::vector<std::string> sample_peers(const TableSchema& table, const TableGroup& group,
                                      const GeneratorConfig& config) {
  std::vector<std::string> peers;
  for (const auto& m : group.members)
    if (m != table.name) peers.push_back(m);
  std::sort(peers.begin(), peers.end());
  peers.erase(std::unique(peers.begin(), peers.end()), peers.end());
  if (peers.size() <= config.context_sample_q) return peers;

  SeededRng rng(config.seed ^ text::fnv1a64(table.name));
  std::vector<std::string> chosen;
  for (auto i : rng.sample_indices(peers.size(), config.context_sample_q)) chosen.push_back(peers[i]);
  return chosen;
}

std::string build_context(const TableSchema& table, const TableGroup* group,
                          const std::map<std::string, const TableSchema*>& tables_by_name,
                          const GeneratorConfig& config) {
  if (!config.context_enabled || config.baseline) return "";
  std::string out;
  if (config.table_names_enabled) {
    out += "Target table: " + table.name + "\n";
  } else if (table.summary && !table.summary->empty()) {
    out += "Target table summary: " + *table.summary + "\n";
  }
  if (!group) return out;

  std::string peers;
  for (const auto& name : sample_peers(table, *group, config)) {
    auto it = tables_by_name.find(name);
    const std::string summary =
        it != tables_by_name.end() && it->second->summary ? *it->second->summary : std::string();
    if (config.table_names_enabled) {
      peers += "- " + name + (summary.empty() ? "" : ": " + summary) + "\n";
    } else if (!summary.empty()) {
      peers += "- " + summary + "\n";
    }
  }
  if (!peers.empty()) out += "Related tables from the same group:\n" + peers;
  return out;
}

RenderedPrompt build_generator_prompt(const TableSchema& table, std::span<const ColumnName> columns,
                                      const std::string& context, const GeneratorConfig& config,
                                      const TemplateSet& templates) {
  std::string names;
  for (const auto& c : columns) names += c.raw() + "\n";

  if (config.baseline)
    return render(templates.baseline, {{"column_count", std::to_string(columns.size())}, {"columns", names}});

  std::string header = "Expand the following " + std::to_string(columns.size()) + " column names";
  if (config.table_names_enabled) header += " of table " + table.name;
  header += ":\n";

  return render(templates.generator,
                {{"rules_block", config.rules_enabled ? render_rules() : ""},
                 {"format_block", std::string(config.cot_enabled ? kCotFormat : kDirectFormat)},
                 {"exemplars_block", render_exemplars(config)},
                 {"context_block", context},
                 {"columns_block", header + names}});
}

std::map<std::string, ParsedColumn> parse_cot_reply(std::string_view reply) {
  std::map<std::string, ParsedColumn> out;
  ParsedColumn* current = nullptr;
  std::istringstream in{std::string(reply)};
  std::string raw_line;
  while (std::getline(in, raw_line)) {
    auto line = strip_decoration(raw_line);
    if (line.empty()) continue;
    if (take_keyword(line, "COLUMN:")) {
      auto [it, inserted] = out.emplace(line, ParsedColumn{line, {}, {}, std::nullopt});
      current = inserted ? &it->second : nullptr;  // first block wins
    } else if (!current) {
      continue;
    } else if (take_keyword(line, "TOKENS:")) {
      current->tokens.clear();
      for (auto& t : text::split(line, "|")) {
        auto tok = text::trim(t);
        if (!tok.empty()) current->tokens.push_back(std::move(tok));
      }
    } else if (take_keyword(line, "RULE:")) {
      auto arrow = line.find("->");
      std::size_t width = 2;
      if (arrow == std::string::npos) {
        arrow = line.find("→");
        width = std::string_view("→").size();
      }
      if (arrow == std::string::npos) continue;
      current->rules.push_back({text::trim(std::string_view(line).substr(0, arrow)),
                                text::collapse_whitespace(std::string_view(line).substr(arrow + width))});
    } else if (take_keyword(line, "EXPANSION:")) {
      current->expansion = text::collapse_whitespace(line);
    }
  }
  return out;
}

std::map<std::string, std::string> parse_direct_reply(std::string_view reply) {
  std::map<std::string, std::string> out;
  std::istringstream in{std::string(reply)};
  std::string raw_line;
  while (std::getline(in, raw_line)) {
    auto line = strip_decoration(raw_line);
    const auto arrow = line.find("=>");
    if (arrow == std::string::npos) continue;
    auto name = text::trim(std::string_view(line).substr(0, arrow));
    auto expansion = text::collapse_whitespace(std::string_view(line).substr(arrow + 2));
    if (!name.empty()) out.emplace(std::move(name), std::move(expansion));
  }
  return out;
}

BuildOutcome record_from_cot(const std::string& table, const ColumnName& column, const ParsedColumn& parsed) {
  BuildOutcome outcome;
  if (parsed.tokens.empty()) {
    outcome.problems.push_back("no TOKENS line");
    return outcome;
  }
  auto seq = align_tokens(column, parsed.tokens);
  if (!seq) {
    outcome.problems.push_back("tokens " + text::join(parsed.tokens, " | ") +
                               " do not spell the column name '" + column.raw() + "'");
    return outcome;
  }
  if (parsed.rules.size() != seq->tokens.size()) {
    outcome.problems.push_back("expected one RULE line for each of the " +
                               std::to_string(seq->tokens.size()) + " tokens, got " +
                               std::to_string(parsed.rules.size()));
    return outcome;
  }

  E2Record rec{table, column, *seq, {}, "", false};
  for (std::size_t i = 0; i < parsed.rules.size(); ++i) {
    if (!text::iequals(parsed.rules[i].token, seq->tokens[i])) {
      outcome.problems.push_back("RULE " + std::to_string(i + 1) + " is for '" + parsed.rules[i].token +
                                 "' but token " + std::to_string(i + 1) + " is '" + seq->tokens[i] + "'");
      return outcome;
    }
    rec.rules.push_back({seq->tokens[i], parsed.rules[i].expansion});
  }
  assemble_expansion(rec);
  if (parsed.expansion && text::normalize_phrase(*parsed.expansion) != text::normalize_phrase(rec.expansion))
    outcome.problems.push_back("EXPANSION '" + *parsed.expansion + "' is not the rule expansions joined in order");

  auto violations = record_violations(rec);
  outcome.problems.insert(outcome.problems.end(), violations.begin(), violations.end());
  if (outcome.problems.empty()) outcome.record = std::move(rec);
  return outcome;
}

BuildOutcome record_from_direct(const std::string& table, const ColumnName& column,
                                const std::string& expansion) {
  BuildOutcome outcome;
  const std::string& raw = column.raw();

  TokenSequence seq;
  std::string current;
  for (char c : raw) {
    if (is_delimiter_char(c)) {
      seq.tokens.push_back(current);
      seq.delimiters.emplace_back(1, c);
      current.clear();
    } else {
      current.push_back(c);
    }
  }
  seq.tokens.push_back(current);
  if (!validate_token_sequence(column, seq)) {
    outcome.problems.push_back("column name '" + raw + "' cannot be split at its delimiters");
    return outcome;
  }

  const auto words = text::split_whitespace(expansion);
  const std::size_t n = seq.tokens.size(), m = words.size();
  if (m == 0) {
    outcome.problems.push_back("empty expansion");
    return outcome;
  }

  auto fits = [&](std::size_t t, std::size_t begin, std::size_t end) {
    std::vector<std::string> share(words.begin() + static_cast<std::ptrdiff_t>(begin),
                                   words.begin() + static_cast<std::ptrdiff_t>(end));
    const auto phrase = text::join(share, " ");
    if (is_numeric_token(seq.tokens[t])) return phrase == seq.tokens[t];
    return is_valid_expansion(seq.tokens[t], phrase);
  };

  // feasible[t][w]: tokens t.. can take words w.. exactly.
  std::vector<std::vector<char>> feasible(n + 1, std::vector<char>(m + 1, 0));
  feasible[n][m] = 1;
  for (std::size_t t = n; t-- > 0;)
    for (std::size_t w = 0; w < m; ++w)
      for (std::size_t end = w + 1; end <= m; ++end)
        if (feasible[t + 1][end] && fits(t, w, end)) {
          feasible[t][w] = 1;
          break;
        }
  if (!feasible[0][0]) {
    outcome.problems.push_back("expansion '" + expansion + "' does not cover the tokens of '" + raw + "'");
    return outcome;
  }

  E2Record rec{table, column, seq, {}, "", false};
  std::size_t w = 0;
  for (std::size_t t = 0; t < n; ++t) {
    std::size_t end = w + 1;
    while (!(feasible[t + 1][end] && fits(t, w, end))) ++end;  // shortest feasible share
    std::vector<std::string> share(words.begin() + static_cast<std::ptrdiff_t>(w),
                                   words.begin() + static_cast<std::ptrdiff_t>(end));
    rec.rules.push_back({seq.tokens[t], text::join(share, " ")});
    w = end;
  }
  assemble_expansion(rec);
  outcome.problems = record_violations(rec);
  if (outcome.problems.empty()) outcome.record = std::move(rec);
  return outcome;
}

BatchOutcome expand_batch(const TableSchema& table, std::span<const ColumnName> columns,
                          const std::string& context, const GeneratorConfig& config,
                          LlmGateway& gateway, const TemplateSet& templates) {
  const bool direct = config.baseline || !config.cot_enabled;
  std::vector<std::optional<E2Record>> done(columns.size());
  std::vector<std::size_t> pending(columns.size());
  for (std::size_t i = 0; i < columns.size(); ++i) pending[i] = i;
  std::map<std::size_t, std::vector<std::string>> problems;

  for (int attempt = 0; attempt < 2 && !pending.empty(); ++attempt) {
    std::vector<ColumnName> ask;
    for (auto i : pending) ask.push_back(columns[i]);
    auto prompt = build_generator_prompt(table, ask, context, config, templates);
    if (attempt == 1) {
      std::string note = "\n\nYour previous answer for these column names could not be used:\n";
      for (auto i : pending) note += "- " + columns[i].raw() + ": " + text::join(problems[i], "; ") + "\n";
      note += "Answer again for exactly these column names, following the required format.";
      prompt.user += note;
    }
    const auto reply =
        gateway.complete(CompletionRequest{prompt.system, prompt.user, 0.0, 6000, config.model_id}).text;

    std::vector<std::size_t> still_failing;
    if (direct) {
      const auto parsed = parse_direct_reply(reply);
      for (auto i : pending) {
        const auto* expansion = find_column(parsed, columns[i].raw());
        BuildOutcome outcome;
        if (expansion)
          outcome = record_from_direct(table.name, columns[i], *expansion);
        else
          outcome.problems.push_back("missing from the reply");
        if (outcome.record) {
          done[i] = std::move(outcome.record);
        } else {
          problems[i] = std::move(outcome.problems);
          still_failing.push_back(i);
        }
      }
    } else {
      const auto parsed = parse_cot_reply(reply);
      for (auto i : pending) {
        const auto* block = find_column(parsed, columns[i].raw());
        BuildOutcome outcome;
        if (block)
          outcome = record_from_cot(table.name, columns[i], *block);
        else
          outcome.problems.push_back("missing from the reply");
        if (outcome.record) {
          done[i] = std::move(outcome.record);
        } else {
          problems[i] = std::move(outcome.problems);
          still_failing.push_back(i);
        }
      }
    }
    pending = std::move(still_failing);
  }

  BatchOutcome out;
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (done[i]) {
      out.records.push_back(std::move(*done[i]));
    } else {
      out.records.push_back(identity_record(table.name, columns[i]));
      ++out.fallback_count;
    }
  }
  return out;
}

GeneratorResult run_generator(const std::vector<TableSchema>& schemas,
                              const std::vector<TableGroup>& groups, const GeneratorConfig& config,
                              LlmGateway& gateway, const TemplateSet& templates) {
  config.validate();

  std::map<std::string, const TableSchema*> by_name;
  for (const auto& t : schemas) by_name.emplace(t.name, &t);
  std::map<std::string, const TableGroup*> group_of;
  for (const auto& g : groups)
    for (const auto& m : g.members) group_of.emplace(m, &g);

  struct Job {
    const TableSchema* table;
    std::size_t begin, end;
    const std::string* context;
  };
  std::vector<std::string> contexts(schemas.size());
  std::vector<Job> jobs;
  for (std::size_t t = 0; t < schemas.size(); ++t) {
    const auto& table = schemas[t];
    auto g = group_of.find(table.name);
    contexts[t] = build_context(table, g == group_of.end() ? nullptr : g->second, by_name, config);
    for (std::size_t b = 0; b < table.columns.size(); b += config.batch_size_p)
      jobs.push_back({&table, b, std::min(b + config.batch_size_p, table.columns.size()), &contexts[t]});
  }

  struct JobResult {
    std::optional<BatchOutcome> outcome;
    std::string error;
  };
  auto results = parallel_map(jobs.size(), config.parallelism, [&](std::size_t i) {
    const auto& job = jobs[i];
    std::span<const ColumnName> cols(job.table->columns.data() + job.begin, job.end - job.begin);
    try {
      return JobResult{expand_batch(*job.table, cols, *job.context, config, gateway, templates), {}};
    } catch (const LlmError& e) {
      return JobResult{std::nullopt, job.table->name + " columns " + std::to_string(job.begin + 1) + "-" +
                                         std::to_string(job.end) + ": " + e.what()};
    }
  });

  GeneratorResult out;
  std::vector<std::string> errors;
  for (auto& r : results) {
    if (!r.outcome) {
      errors.push_back(std::move(r.error));
      continue;
    }
    out.fallback_count += r.outcome->fallback_count;
    for (auto& rec : r.outcome->records) {
      if (rec.fallback) out.flagged.push_back(rec.table_name + "." + rec.column.raw());
      out.records.push_back(std::move(rec));
    }
  }
  if (!errors.empty())
    throw GeneratorError(std::to_string(errors.size()) + " generator batch(es) failed: " + text::join(errors, " | "),
                         std::move(out.records));
  return out;
}

}  // namespace colexpand
