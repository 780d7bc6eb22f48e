#include "colexpand/prompts.hpp"

#include <fstream>
#include <sstream>

#include "colexpand/text.hpp"
#include "json.hpp"

namespace colexpand {

namespace {

constexpr std::string_view kUserMarker = "[[user]]";

constexpr std::string_view kSummarizerTemplate = R"(You are a data steward who organizes the tables of a data lake by topic.
You will receive a batch of table schemas, one per line, written as TableName(column1, column2, ...).
Cluster the tables into groups of related tables. For each group, give a short English phrase that best summarizes the group. For each table, give a one-sentence summary of what the table stores.
Put every table in exactly one group and copy table names exactly as given.

Reply in exactly this format and nothing else:
GROUP: <group summary>
TABLE: <table name> | <table summary>
TABLE: <table name> | <table summary>
GROUP: <group summary>
TABLE: <table name> | <table summary>
[[user]]
Cluster these {{table_count}} tables:
{{tables}}
)";

constexpr std::string_view kGeneratorTemplate = R"(You expand abbreviated column names of database tables into full English phrases.

{{rules_block}}

{{format_block}}

{{exemplars_block}}
[[user]]
{{context_block}}

{{columns_block}}
)";

constexpr std::string_view kBaselineTemplate = R"(You expand abbreviated column names into full English phrases.
Example:
c_name => customer name

Reply with one line per column in exactly this format:
<column name> => <expansion>
[[user]]
Expand the following {{column_count}} column names:
{{columns}}
)";

constexpr std::string_view kReviserTemplate = R"(You review how abbreviation tokens were expanded across all tables of a data lake.
A token below was expanded in more than one way in different column names.
Decide whether this token should always have one single expansion across this data lake, and if so, which of the observed expansions it is.
Explain your reasoning briefly, then end your reply with exactly one of these final lines:
DECISION: UNIQUE | <expansion>
DECISION: NOT UNIQUE
[[user]]
Summaries of all table groups in the data lake:
{{group_summaries}}

Token: {{token}}
Observed expansions:
{{expansions}}
)";

const std::vector<std::string> kGeneratorRules = {
    "Expand all abbreviations in a column name.",
    "Do not expand numbers.",
    "Do not add extra words or explanations.",
    "Expand every token of the column name.",
    "Keep the tokens in their original order.",
    "Output only the structured format described below.",
    "Use the table context to disambiguate abbreviations.",
    "Prefer the standard expansion used in the domain of the table.",
    "Give exactly one expansion for each token within a column name.",
};

}  // namespace

PromptTemplate PromptTemplate::parse(std::string_view text) {
  std::string system, user;
  bool in_user = false;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    if (!in_user && text::trim(line) == kUserMarker) {
      in_user = true;
      continue;
    }
    (in_user ? user : system) += line + "\n";
  }
  if (!in_user) throw ValidationError("prompt template has no [[user]] section");
  return {std::move(system), std::move(user)};
}

PromptTemplate PromptTemplate::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open prompt template '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

std::string PromptTemplate::serialize() const {
  return system + std::string(kUserMarker) + "\n" + user;
}

std::string render_text(std::string_view tmpl, const std::map<std::string, std::string>& vars) {
  std::string out;
  std::size_t i = 0;
  while (i < tmpl.size()) {
    const auto open = tmpl.find("{{", i);
    if (open == std::string_view::npos) {
      out.append(tmpl.substr(i));
      break;
    }
    const auto close = tmpl.find("}}", open + 2);
    if (close == std::string_view::npos) throw ValidationError("unterminated placeholder in prompt template");
    out.append(tmpl.substr(i, open - i));
    const std::string name = text::trim(tmpl.substr(open + 2, close - open - 2));
    auto it = vars.find(name);
    if (it == vars.end()) throw ValidationError("prompt template uses unknown placeholder {{" + name + "}}");
    out.append(it->second);
    i = close + 2;
  }

  // Squeeze blank-line runs and trailing spaces.
  std::istringstream in(out);
  std::string line, squeezed;
  bool last_blank = true;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == ' ' || line.back() == '\r')) line.pop_back();
    const bool blank = line.empty();
    if (blank && last_blank) continue;
    squeezed += line + "\n";
    last_blank = blank;
  }
  while (!squeezed.empty() && (squeezed.back() == '\n')) squeezed.pop_back();
  return squeezed;
}

RenderedPrompt render(const PromptTemplate& tmpl, const std::map<std::string, std::string>& vars) {
  return {render_text(tmpl.system, vars), render_text(tmpl.user, vars)};
}

std::vector<Exemplar> default_exemplars() {
  return {
      {"EMPS", "eSal", {"e", "Sal"}, {{"e", "Employee"}, {"Sal", "Salary"}}, "Employee Salary"},
      {"EMPS",
       "eDTPh",
       {"e", "DT", "Ph"},
       {{"e", "Employee"}, {"DT", "Day Time"}, {"Ph", "Phone"}},
       "Employee Day Time Phone"},
      {"RUSSELL_INDEX", "RUSS_CD", {"RUSS", "CD"}, {{"RUSS", "Russell"}, {"CD", "Code"}}, "Russell Code"},
  };
}

std::vector<Exemplar> load_exemplars(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open exemplar file '" + path.string() + "'");
  std::vector<Exemplar> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    try {
      auto obj = nlohmann::json::parse(line);
      Exemplar ex;
      ex.table = obj.value("table", "");
      ex.column = obj.at("column").get<std::string>();
      ex.tokens = obj.at("tokens").get<std::vector<std::string>>();
      for (const auto& r : obj.at("rules"))
        ex.rules.push_back({r.at("token").get<std::string>(), r.at("expansion").get<std::string>()});
      ex.expansion = obj.at("expansion").get<std::string>();
      out.push_back(std::move(ex));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path.string(), line_no, e.what());
    }
  }
  return out;
}

const std::vector<std::string>& generator_rules() { return kGeneratorRules; }

TemplateSet TemplateSet::builtin() {
  return {PromptTemplate::parse(kSummarizerTemplate), PromptTemplate::parse(kGeneratorTemplate),
          PromptTemplate::parse(kBaselineTemplate), PromptTemplate::parse(kReviserTemplate)};
}

TemplateSet load_templates(const TemplatePaths& paths) {
  auto set = TemplateSet::builtin();
  if (paths.summarizer) set.summarizer = PromptTemplate::load(*paths.summarizer);
  if (paths.generator) set.generator = PromptTemplate::load(*paths.generator);
  if (paths.baseline) set.baseline = PromptTemplate::load(*paths.baseline);
  if (paths.reviser) set.reviser = PromptTemplate::load(*paths.reviser);
  return set;
}

void write_builtin_templates(const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto put = [&](const char* name, const std::string& body) {
    std::ofstream out(dir / name, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write '" + (dir / name).string() + "'");
    out << body;
  };
  const auto set = TemplateSet::builtin();
  put("summarizer.txt", set.summarizer.serialize());
  put("generator.txt", set.generator.serialize());
  put("baseline.txt", set.baseline.serialize());
  put("reviser.txt", set.reviser.serialize());

  std::string exemplars;
  for (const auto& ex : default_exemplars()) {
    nlohmann::ordered_json obj;
    obj["table"] = ex.table;
    obj["column"] = ex.column;
    obj["tokens"] = ex.tokens;
    auto rules = nlohmann::ordered_json::array();
    for (const auto& r : ex.rules) rules.push_back({{"token", r.token}, {"expansion", r.expansion}});
    obj["rules"] = rules;
    obj["expansion"] = ex.expansion;
    exemplars += obj.dump() + "\n";
  }
  put("exemplars.jsonl", exemplars);
}

}  // namespace colexpand
