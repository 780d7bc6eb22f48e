#include "colexpand/summarizer.hpp"

#include <set>
#include <sstream>
#include <unordered_map>

#include "colexpand/parallel.hpp"
#include "colexpand/sampling.hpp"
#include "colexpand/text.hpp"

namespace colexpand {

namespace {

constexpr std::string_view kFormatReminder =
    "Your previous reply could not be used: {error}\n"
    "Reply again. Use only GROUP: and TABLE: lines, put every table above in exactly one group, "
    "and write each table line as TABLE: <table name> | <table summary>.";

// Strips list markers and emphasis the model sometimes wraps lines in.
std::string strip_decoration(std::string_view line) {
  std::string s = text::trim(line);
  while (!s.empty() && (s.front() == '-' || s.front() == '*' || s.front() == '#' || s.front() == '>'))
    s = text::trim(std::string_view(s).substr(1));
  std::string out;
  for (char c : s)
    if (c != '*') out.push_back(c);
  return text::trim(out);
}

bool take_keyword(std::string& line, std::string_view keyword) {
  if (!text::istarts_with(line, keyword)) return false;
  line = text::trim(std::string_view(line).substr(keyword.size()));
  return true;
}

}  // namespace

void SummarizerConfig::validate() const {
  if (batch_size_k < 1) throw ValidationError("batch size k must be >= 1");
  if (table_summary_word_cap < 1 || group_summary_word_cap < 1)
    throw ValidationError("summary word caps must be >= 1");
}

std::string render_table_line(const TableSchema& table) {
  std::string out = table.name + "(";
  for (std::size_t i = 0; i < table.columns.size(); ++i) {
    if (i) out += ", ";
    out += table.columns[i].raw();
  }
  return out + ")";
}

std::string normalize_summary(std::string_view summary) {
  return text::to_lower(text::collapse_whitespace(summary));
}

std::string cap_words(std::string_view s, std::size_t max_words) {
  auto words = text::split_whitespace(s);
  if (words.size() > max_words) words.resize(max_words);
  return text::join(words, " ");
}

RenderedPrompt build_summarizer_prompt(const std::vector<TableSchema>& batch, const PromptTemplate& tmpl) {
  std::string tables;
  for (const auto& t : batch) tables += "- " + render_table_line(t) + "\n";
  return render(tmpl, {{"table_count", std::to_string(batch.size())}, {"tables", tables}});
}

BatchSummary parse_summarizer_reply(std::string_view reply, const std::vector<TableSchema>& batch,
                                    const std::string& id_prefix) {
  std::map<std::string, std::string> exact;         // name -> name
  std::map<std::string, std::vector<std::string>> folded;  // lower(name) -> names
  for (const auto& t : batch) {
    exact.emplace(t.name, t.name);
    folded[text::to_lower(t.name)].push_back(t.name);
  }
  auto resolve = [&](const std::string& name) -> std::string {
    if (auto it = exact.find(name); it != exact.end()) return it->second;
    if (auto it = folded.find(text::to_lower(name)); it != folded.end() && it->second.size() == 1)
      return it->second.front();
    throw ReplyFormatError("unknown table '" + name + "'");
  };

  BatchSummary out;
  std::istringstream in{std::string(reply)};
  std::string raw_line;
  while (std::getline(in, raw_line)) {
    auto line = strip_decoration(raw_line);
    if (line.empty()) continue;
    if (take_keyword(line, "GROUP:")) {
      if (line.empty()) throw ReplyFormatError("group without a summary");
      out.groups.push_back(TableGroup{id_prefix + "g" + std::to_string(out.groups.size() + 1), line, {}});
    } else if (take_keyword(line, "TABLE:")) {
      if (out.groups.empty()) throw ReplyFormatError("TABLE line before the first GROUP line");
      const auto bar = line.find('|');
      if (bar == std::string::npos) throw ReplyFormatError("table line without '|': " + line);
      const auto name = resolve(text::trim(std::string_view(line).substr(0, bar)));
      const auto summary = text::trim(std::string_view(line).substr(bar + 1));
      if (summary.empty()) throw ReplyFormatError("table '" + name + "' has no summary");
      if (!out.table_summaries.emplace(name, summary).second)
        throw ReplyFormatError("table '" + name + "' appears twice");
      out.groups.back().members.push_back(name);
    }
    // anything else is commentary and ignored
  }

  for (const auto& g : out.groups)
    if (g.members.empty()) throw ReplyFormatError("group '" + g.summary + "' has no tables");
  std::vector<std::string> missing;
  for (const auto& t : batch)
    if (!out.table_summaries.count(t.name)) missing.push_back(t.name);
  if (!missing.empty()) throw ReplyFormatError("tables missing from reply: " + text::join(missing, ", "));
  return out;
}

BatchSummary summarize_batch(const std::vector<TableSchema>& batch, const SummarizerConfig& config,
                             LlmGateway& gateway, const PromptTemplate& tmpl, const std::string& id_prefix) {
  if (batch.empty() || batch.size() > config.batch_size_k)
    throw ValidationError("summarizer batch must hold between 1 and k tables");

  const auto prompt = build_summarizer_prompt(batch, tmpl);
  CompletionRequest request{prompt.system, prompt.user, 0.0, 6000, config.model_id};

  BatchSummary summary;
  std::string error;
  for (int attempt = 0; attempt < 2; ++attempt) {
    if (attempt == 1) {
      std::string reminder(kFormatReminder);
      reminder.replace(reminder.find("{error}"), 7, error);
      request.user_text = prompt.user + "\n\n" + reminder;
    }
    try {
      summary = parse_summarizer_reply(gateway.complete(request).text, batch, id_prefix);
      error.clear();
      break;
    } catch (const ReplyFormatError& e) {
      error = e.what();
    }
  }
  if (!error.empty()) {
    std::vector<std::string> names;
    for (const auto& t : batch) names.push_back(t.name);
    throw SummarizerError("could not summarize batch [" + text::join(names, ", ") + "]: " + error);
  }

  for (auto& g : summary.groups) g.summary = cap_words(g.summary, config.group_summary_word_cap);
  for (auto& [name, s] : summary.table_summaries) s = cap_words(s, config.table_summary_word_cap);
  return summary;
}

std::vector<TableGroup> global_merge(const std::vector<TableGroup>& groups) {
  std::vector<TableGroup> out;
  std::unordered_map<std::string, std::size_t> by_summary;
  for (const auto& g : groups) {
    const auto key = normalize_summary(g.summary);
    auto [it, inserted] = by_summary.emplace(key, out.size());
    if (inserted) {
      out.push_back(g);
    } else {
      auto& members = out[it->second].members;
      members.insert(members.end(), g.members.begin(), g.members.end());
    }
  }
  return out;
}

std::vector<std::vector<TableSchema>> partition_batches(const std::vector<TableSchema>& schemas,
                                                        std::size_t k) {
  if (k < 1) throw ValidationError("batch size k must be >= 1");
  std::vector<std::vector<TableSchema>> batches;
  for (std::size_t i = 0; i < schemas.size(); i += k)
    batches.emplace_back(schemas.begin() + static_cast<std::ptrdiff_t>(i),
                         schemas.begin() + static_cast<std::ptrdiff_t>(std::min(i + k, schemas.size())));
  return batches;
}

SummarizerResult run_summarizer(const std::vector<TableSchema>& schemas, const SummarizerConfig& config,
                                LlmGateway& gateway, const PromptTemplate& tmpl) {
  config.validate();
  if (schemas.empty()) throw ValidationError("summarizer needs at least one table");

  auto ordered = schemas;
  if (config.shuffle_tables) SeededRng(config.seed).shuffle(ordered);

  SummarizerResult result;
  for (const auto& t : ordered) result.batch_order.push_back(t.name);

  const auto batches = partition_batches(ordered, config.batch_size_k);
  auto summaries = parallel_map(batches.size(), config.parallelism, [&](std::size_t i) {
    return summarize_batch(batches[i], config, gateway, tmpl, "b" + std::to_string(i + 1) + ".");
  });

  std::vector<TableGroup> all_groups;
  std::map<std::string, std::string> table_summaries;
  for (auto& s : summaries) {
    all_groups.insert(all_groups.end(), s.groups.begin(), s.groups.end());
    table_summaries.insert(s.table_summaries.begin(), s.table_summaries.end());
  }
  result.groups = global_merge(all_groups);
  result.schemas = schemas;
  for (auto& t : result.schemas) t.summary = table_summaries.at(t.name);
  return result;
}

}  // namespace colexpand
