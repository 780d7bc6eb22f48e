#pragma once

// Prompt templates. A template file holds the system text, a line reading
// exactly "[[user]]", then the user text. Placeholders are written
// {{name}}; rendering fails on any placeholder without a value so a typo in
// an override file is caught before tokens are spent.

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "colexpand/core_model.hpp"

namespace colexpand {

struct PromptTemplate {
  std::string system;
  std::string user;

  static PromptTemplate parse(std::string_view text);
  static PromptTemplate load(const std::filesystem::path& path);
  std::string serialize() const;
};

struct RenderedPrompt {
  std::string system;
  std::string user;
};

// Substitutes {{name}} placeholders, then squeezes runs of blank lines left
// behind by empty blocks down to one and trims the ends.
std::string render_text(std::string_view tmpl, const std::map<std::string, std::string>& vars);
RenderedPrompt render(const PromptTemplate& tmpl, const std::map<std::string, std::string>& vars);

// Worked example shown to the generator.
struct Exemplar {
  std::string table;
  std::string column;
  std::vector<std::string> tokens;
  std::vector<ExpansionRule> rules;
  std::string expansion;
};

std::vector<Exemplar> default_exemplars();
// JSON Lines: {"table", "column", "tokens": [...], "rules": [{"token","expansion"}], "expansion"}
std::vector<Exemplar> load_exemplars(const std::filesystem::path& path);

// The nine generator rules. The first three are the ones the method
// description names explicitly; the rest pin down the output discipline.
const std::vector<std::string>& generator_rules();

struct TemplateSet {
  PromptTemplate summarizer;
  PromptTemplate generator;
  PromptTemplate baseline;
  PromptTemplate reviser;

  static TemplateSet builtin();
};

// Optional override paths; unset entries keep the builtin template.
struct TemplatePaths {
  std::optional<std::filesystem::path> summarizer;
  std::optional<std::filesystem::path> generator;
  std::optional<std::filesystem::path> baseline;
  std::optional<std::filesystem::path> reviser;
};

TemplateSet load_templates(const TemplatePaths& paths);

// Writes the builtin templates and exemplars as editable files into dir.
void write_builtin_templates(const std::filesystem::path& dir);

}  // namespace colexpand
