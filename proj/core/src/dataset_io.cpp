#include "colexpand/dataset_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <numeric>
#include <set>
#include <sstream>

#include "colexpand/text.hpp"
#include "json.hpp"

namespace colexpand {

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

namespace {

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  return in;
}

std::ofstream open_output(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  return out;
}

void finish(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw IoError("write to '" + path.string() + "' failed");
}

// Calls fn(object, line_number) for every non-blank line.
void for_each_json_line(const std::filesystem::path& path,
                        const std::function<void(const json&, std::size_t)>& fn) {
  auto in = open_input(path);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(path.string(), line_no, std::string("invalid JSON: ") + e.what());
    }
    if (!obj.is_object()) throw ParseError(path.string(), line_no, "expected a JSON object");
    try {
      fn(obj, line_no);
    } catch (const ParseError&) {
      throw;
    } catch (const json::exception& e) {
      throw ParseError(path.string(), line_no, e.what());
    } catch (const ValidationError& e) {
      throw ParseError(path.string(), line_no, e.what());
    } catch (const AlignmentError& e) {
      throw ParseError(path.string(), line_no, e.what());
    }
  }
}

std::string required_string(const json& obj, std::initializer_list<const char*> keys) {
  for (const char* key : keys) {
    auto it = obj.find(key);
    if (it != obj.end()) return it->get<std::string>();
  }
  throw ValidationError(std::string("missing field '") + *keys.begin() + "'");
}

ordered_json record_to_json(const E2Record& r) {
  ordered_json rules = ordered_json::array();
  for (const auto& rule : r.rules)
    rules.push_back(ordered_json{{"token", rule.token}, {"expansion", rule.expansion}});
  ordered_json obj;
  obj["table"] = r.table_name;
  obj["column"] = r.column.raw();
  obj["tokens"] = r.token_sequence.tokens;
  obj["delimiters"] = r.token_sequence.delimiters;
  obj["rules"] = std::move(rules);
  obj["expansion"] = r.expansion;
  if (r.fallback) obj["fallback"] = true;
  return obj;
}

E2Record record_from_json(const json& obj) {
  E2Record r{required_string(obj, {"table"}), ColumnName(required_string(obj, {"column"})),
             TokenSequence{obj.at("tokens").get<std::vector<std::string>>(),
                           obj.at("delimiters").get<std::vector<std::string>>()},
             {}, required_string(obj, {"expansion"}), obj.value("fallback", false)};
  for (const auto& rule : obj.at("rules"))
    r.rules.push_back({rule.at("token").get<std::string>(), rule.at("expansion").get<std::string>()});
  if (auto problems = record_violations(r); !problems.empty())
    throw ValidationError("invalid E2 record for '" + r.column.raw() + "': " + problems.front());
  return r;
}

}  // namespace

// ---------------------------------------------------------------------------
// SynonymLexicon

SynonymLexicon SynonymLexicon::from_classes(const std::vector<std::vector<std::string>>& classes) {
  // Union-find over distinct phrases.
  std::map<std::string, std::size_t> id;
  std::vector<std::string> phrases;
  std::vector<std::size_t> parent;
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  auto intern = [&](const std::string& p) {
    auto [it, inserted] = id.emplace(p, phrases.size());
    if (inserted) {
      phrases.push_back(p);
      parent.push_back(parent.size());
    }
    return it->second;
  };

  for (const auto& cls : classes) {
    std::set<std::string> distinct;
    for (const auto& p : cls) {
      auto norm = text::normalize_phrase(p);
      if (!norm.empty()) distinct.insert(std::move(norm));
    }
    if (distinct.size() < 2)
      throw ValidationError("synonym class needs at least two distinct phrases: '" +
                            text::join(cls, " = ") + "'");
    std::size_t first = intern(*distinct.begin());
    for (const auto& p : distinct) parent[find(intern(p))] = find(first);
  }

  std::map<std::size_t, std::vector<std::string>> grouped;
  for (std::size_t i = 0; i < phrases.size(); ++i) grouped[find(i)].push_back(phrases[i]);

  SynonymLexicon lex;
  for (auto& [root, members] : grouped) {
    std::sort(members.begin(), members.end());
    lex.classes_.push_back(std::move(members));
  }
  std::sort(lex.classes_.begin(), lex.classes_.end());
  for (std::size_t c = 0; c < lex.classes_.size(); ++c)
    for (const auto& p : lex.classes_[c]) {
      lex.index_[p] = static_cast<int>(c);
      lex.max_words_ = std::max(lex.max_words_, text::split_whitespace(p).size());
    }
  return lex;
}

SynonymLexicon SynonymLexicon::merged_with(const SynonymLexicon& other) const {
  auto all = classes_;
  all.insert(all.end(), other.classes_.begin(), other.classes_.end());
  return from_classes(all);
}

int SynonymLexicon::class_of(const std::string& phrase) const {
  auto it = index_.find(phrase);
  return it == index_.end() ? -1 : it->second;
}

// ---------------------------------------------------------------------------
// Schemas

std::vector<TableSchema> load_schemas(const std::filesystem::path& path) {
  std::vector<TableSchema> out;
  std::set<std::string> names;
  for_each_json_line(path, [&](const json& obj, std::size_t line_no) {
    TableSchema t;
    t.name = required_string(obj, {"table_name", "table"});
    const auto& cols = obj.at("columns");
    if (!cols.is_array()) throw ValidationError("'columns' must be an array");
    if (cols.empty()) throw ValidationError("table has no columns");
    for (const auto& c : cols) t.columns.emplace_back(c.get<std::string>());
    if (auto it = obj.find("summary"); it != obj.end() && !it->is_null())
      t.summary = it->get<std::string>();
    validate_table(t);
    if (!names.insert(t.name).second)
      throw ParseError(path.string(), line_no, "duplicate table name '" + t.name + "'");
    out.push_back(std::move(t));
  });
  return out;
}

void write_schemas(const std::vector<TableSchema>& schemas, const std::filesystem::path& path) {
  auto out = open_output(path);
  for (const auto& t : schemas) {
    ordered_json obj;
    obj["table_name"] = t.name;
    std::vector<std::string> cols;
    for (const auto& c : t.columns) cols.push_back(c.raw());
    obj["columns"] = cols;
    if (t.summary) obj["summary"] = *t.summary;
    out << obj.dump() << '\n';
  }
  finish(out, path);
}

// ---------------------------------------------------------------------------
// Gold labels

std::vector<GoldLabel> load_gold(const std::filesystem::path& path) {
  std::vector<GoldLabel> out;
  std::set<std::pair<std::string, std::string>> keys;
  for_each_json_line(path, [&](const json& obj, std::size_t line_no) {
    GoldLabel g;
    g.table_name = required_string(obj, {"table", "table_name"});
    g.column_raw = required_string(obj, {"column"});
    g.excluded = obj.value("excluded", false);
    if (auto it = obj.find("gold"); it != obj.end() && !it->is_null())
      g.gold_expansion = it->get<std::string>();
    if (g.excluded && !text::trim(g.gold_expansion).empty())
      throw ValidationError("excluded column '" + g.column_raw + "' must have an empty gold");
    if (!g.excluded && text::trim(g.gold_expansion).empty())
      throw ValidationError("column '" + g.column_raw + "' has no gold expansion");
    if (!keys.emplace(g.table_name, g.column_raw).second)
      throw ParseError(path.string(), line_no,
                       "duplicate gold label for " + g.table_name + "." + g.column_raw);
    out.push_back(std::move(g));
  });
  return out;
}

void write_gold(const std::vector<GoldLabel>& labels, const std::filesystem::path& path) {
  auto out = open_output(path);
  for (const auto& g : labels) {
    ordered_json obj;
    obj["table"] = g.table_name;
    obj["column"] = g.column_raw;
    obj["gold"] = g.gold_expansion;
    if (g.excluded) obj["excluded"] = true;
    out << obj.dump() << '\n';
  }
  finish(out, path);
}

// ---------------------------------------------------------------------------
// Synonyms

SynonymLexicon load_synonyms(const std::filesystem::path& path) {
  auto in = open_input(path);
  std::vector<std::vector<std::string>> classes;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (text::trim(line).empty()) continue;
    std::vector<std::string> phrases;
    for (auto& p : text::split(line, "=")) {
      auto norm = text::normalize_phrase(p);
      if (!norm.empty()) phrases.push_back(std::move(norm));
    }
    std::sort(phrases.begin(), phrases.end());
    phrases.erase(std::unique(phrases.begin(), phrases.end()), phrases.end());
    if (phrases.size() < 2)
      throw ParseError(path.string(), line_no, "synonym class needs at least two phrases");
    classes.push_back(std::move(phrases));
  }
  return SynonymLexicon::from_classes(classes);
}

// ---------------------------------------------------------------------------
// Groups

std::vector<TableGroup> load_groups(const std::filesystem::path& path) {
  std::vector<TableGroup> out;
  for_each_json_line(path, [&](const json& obj, std::size_t) {
    TableGroup g{required_string(obj, {"id"}), required_string(obj, {"summary"}),
                 obj.at("members").get<std::vector<std::string>>()};
    if (g.members.empty()) throw ValidationError("group '" + g.id + "' has no members");
    if (text::trim(g.summary).empty()) throw ValidationError("group '" + g.id + "' has no summary");
    out.push_back(std::move(g));
  });
  return out;
}

void write_groups(const std::vector<TableGroup>& groups, const std::filesystem::path& path) {
  auto out = open_output(path);
  for (const auto& g : groups) {
    ordered_json obj;
    obj["id"] = g.id;
    obj["summary"] = g.summary;
    obj["members"] = g.members;
    out << obj.dump() << '\n';
  }
  finish(out, path);
}

// ---------------------------------------------------------------------------
// E2 records

std::string e2_record_to_line(const E2Record& record) { return record_to_json(record).dump(); }

E2Record e2_record_from_line(const std::string& line) { return record_from_json(json::parse(line)); }

std::vector<E2Record> load_e2_records(const std::filesystem::path& path) {
  std::vector<E2Record> out;
  for_each_json_line(path, [&](const json& obj, std::size_t) { out.push_back(record_from_json(obj)); });
  return out;
}

void write_e2_records(const std::vector<E2Record>& records, const std::filesystem::path& path) {
  auto out = open_output(path);
  for (const auto& r : records) out << e2_record_to_line(r) << '\n';
  finish(out, path);
}

void write_unique_rules(const std::map<std::string, std::string>& rules,
                        const std::filesystem::path& path) {
  auto out = open_output(path);
  for (const auto& [token, expansion] : rules)
    out << ordered_json{{"token", token}, {"expansion", expansion}}.dump() << '\n';
  finish(out, path);
}

std::map<std::string, std::string> load_unique_rules(const std::filesystem::path& path) {
  std::map<std::string, std::string> out;
  for_each_json_line(path, [&](const json& obj, std::size_t) {
    out[text::to_lower(required_string(obj, {"token"}))] = required_string(obj, {"expansion"});
  });
  return out;
}

// ---------------------------------------------------------------------------
// Reports

std::string format_percent(double fraction) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f%%", fraction * 100.0);
  return buf;
}

std::string render_report_table(const MetricReport& report) {
  const auto& a = report.aggregates;
  std::ostringstream os;
  char line[128];
  os << "dataset: " << (report.dataset.empty() ? "-" : report.dataset) << "  columns: " << a.columns
     << "  excluded: " << report.excluded << "  unmatched: " << report.unmatched << '\n';
  std::snprintf(line, sizeof line, "%-14s %18s %18s\n", "metric", "without synonyms", "with synonyms");
  os << line;
  auto row = [&](const char* name, double plain, double syn) {
    std::snprintf(line, sizeof line, "%-14s %18s %18s\n", name, format_percent(plain).c_str(),
                  format_percent(syn).c_str());
    os << line;
  };
  row("EM", a.em, a.syn_em);
  row("word F1", a.word_f1, a.syn_word_f1);
  row("embedding F1", a.embed_f1, a.syn_embed_f1);
  return os.str();
}

void write_report(const MetricReport& report, const std::filesystem::path& path) {
  const auto& a = report.aggregates;
  ordered_json obj;
  obj["dataset"] = report.dataset;
  obj["embedder"] = report.embedder;
  obj["columns"] = a.columns;
  obj["excluded"] = report.excluded;
  obj["unmatched"] = report.unmatched;
  obj["aggregates"] = ordered_json{{"em", a.em},           {"word_f1", a.word_f1},
                                   {"embed_f1", a.embed_f1}, {"syn_em", a.syn_em},
                                   {"syn_word_f1", a.syn_word_f1}, {"syn_embed_f1", a.syn_embed_f1}};
  obj["percent"] = ordered_json{{"em", format_percent(a.em)},
                                {"word_f1", format_percent(a.word_f1)},
                                {"embed_f1", format_percent(a.embed_f1)},
                                {"syn_em", format_percent(a.syn_em)},
                                {"syn_word_f1", format_percent(a.syn_word_f1)},
                                {"syn_embed_f1", format_percent(a.syn_embed_f1)}};
  ordered_json cols = ordered_json::array();
  for (const auto& c : report.per_column) {
    cols.push_back(ordered_json{{"table", c.table},
                                {"column", c.column},
                                {"prediction", c.prediction},
                                {"gold", c.gold},
                                {"em", c.em},
                                {"word_f1", c.word_f1},
                                {"embed_f1", c.embed_f1},
                                {"syn_em", c.syn_em},
                                {"syn_word_f1", c.syn_word_f1},
                                {"syn_embed_f1", c.syn_embed_f1}});
  }
  obj["per_column"] = std::move(cols);
  auto out = open_output(path);
  out << obj.dump(2) << '\n';
  finish(out, path);
}

}  // namespace colexpand
