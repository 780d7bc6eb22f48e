// colexpand: expand abbreviated column names with an LLM and score the
// results against gold labels.
//
//   colexpand run --schemas lake.jsonl --out-dir out/ [--mock-script replies.jsonl]
//   colexpand eval --records out/e2.jsonl --gold gold.jsonl --synonyms syn.txt
//   colexpand sweep --param k --values 20,25,30,35,40 --schemas ... --gold ...
//
// Every option may also come from a config file (--config run.toml); options
// given on the command line take precedence.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <mutex>

#include "CLI11.hpp"
#include "colexpand/dataset_io.hpp"
#include "colexpand/evaluator.hpp"
#include "colexpand/pipeline.hpp"
#include "colexpand/prompts.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using namespace colexpand;

namespace {

struct Cli {
  RunConfig config;
  std::string cache_dir, mock_script, record_script, mock_misses, exemplars;
  std::string summarizer_tmpl, generator_tmpl, baseline_tmpl, reviser_tmpl;
  std::string groups, records, report, dataset, sweep_param, templates_out;
  std::vector<std::size_t> sweep_values;
};

std::optional<fs::path> opt_path(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return fs::path(s);
}

void finalize(Cli& cli) {
  auto& c = cli.config;
  c.cache_dir = opt_path(cli.cache_dir);
  c.mock_script = opt_path(cli.mock_script);
  c.record_script = opt_path(cli.record_script);
  c.exemplars = opt_path(cli.exemplars);
  c.templates = {opt_path(cli.summarizer_tmpl), opt_path(cli.generator_tmpl), opt_path(cli.baseline_tmpl),
                 opt_path(cli.reviser_tmpl)};
  if (const char* model = std::getenv("COLEXPAND_MODEL"); model && cli.config.model_id == std::string(kDefaultModel))
    c.model_id = model;
}

// Provider + gateway for one invocation, with optional script recording and
// mock-miss capture.
class Session {
 public:
  explicit Session(const Cli& cli) : cli_(cli) {
    auto provider = make_provider(cli.config);
    if (auto mock = std::dynamic_pointer_cast<MockProvider>(provider); mock && !cli.mock_misses.empty()) {
      misses_path_ = cli.mock_misses;
      mock->set_responder([this](const CompletionRequest& r) -> std::optional<std::string> {
        std::lock_guard lock(mu_);
        nlohmann::ordered_json j;
        j["key"] = prompt_key(r);
        j["system"] = r.system_text;
        j["user"] = r.user_text;
        misses_.push_back(j.dump());
        return std::nullopt;
      });
    }
    if (cli.config.record_script) {
      recorder_ = std::make_shared<RecordingProvider>(provider);
      provider = recorder_;
    }
    gateway_ = std::make_unique<LlmGateway>(provider, make_gateway_options(cli.config));
  }

  ~Session() {
    try {
      if (recorder_) recorder_->write_script(*cli_.config.record_script);
      if (!misses_path_.empty() && !misses_.empty()) {
        std::ofstream out(misses_path_, std::ios::trunc);
        for (const auto& m : misses_) out << m << '\n';
        std::cerr << misses_.size() << " unscripted prompt(s) written to " << misses_path_ << '\n';
      }
    } catch (const std::exception& e) {
      std::cerr << "warning: " << e.what() << '\n';
    }
  }

  LlmGateway& gateway() { return *gateway_; }

 private:
  const Cli& cli_;
  std::shared_ptr<RecordingProvider> recorder_;
  std::unique_ptr<LlmGateway> gateway_;
  std::mutex mu_;
  std::vector<std::string> misses_;
  std::string misses_path_;
};

void add_llm_options(CLI::App& app, Cli& cli) {
  auto& c = cli.config;
  app.add_option("--model", c.model_id, "Chat model id")->capture_default_str();
  app.add_option("--endpoint", c.endpoint, "Chat completions URL")->capture_default_str();
  app.add_option("--api-key-env", c.api_key_env, "Environment variable holding the API key")
      ->capture_default_str();
  app.add_option("--cache-dir", cli.cache_dir, "Directory for the persistent response cache");
  app.add_option("--mock-script", cli.mock_script, "Replay replies from a JSONL mock script instead of calling the LLM");
  app.add_option("--mock-misses", cli.mock_misses, "With --mock-script, write unscripted prompts to this file");
  app.add_option("--record-script", cli.record_script, "Write every (prompt key, reply) pair to a mock script");
  app.add_option("--parallelism", c.parallelism, "Maximum concurrent LLM requests")->capture_default_str();
}

void add_pipeline_options(CLI::App& app, Cli& cli) {
  auto& c = cli.config;
  app.add_option("--k", c.k, "Tables per summarizer batch")->capture_default_str();
  app.add_option("--p", c.p, "Columns per generator batch")->capture_default_str();
  app.add_option("--q", c.q, "Peer tables sampled into the generator context")->capture_default_str();
  app.add_option("--seed", c.seed, "Seed for table shuffling and peer sampling")->capture_default_str();
  app.add_flag("--shuffle-tables", c.shuffle_tables, "Shuffle table order before summarizer batching");
  app.add_flag("--no-context", c.no_context, "Skip the summarizer and peer-table context");
  app.add_flag("--no-table-names", c.no_table_names, "Hide table names from generator and reviser prompts");
  app.add_flag("--no-rules", c.no_rules, "Drop the rule block from generator prompts");
  app.add_flag("--no-cot", c.no_cot, "Ask for expansions directly, without token reasoning");
  app.add_flag("--no-reviser", c.no_reviser, "Skip the reviser");
  app.add_flag("--baseline", c.baseline, "Plain few-shot prompting (implies all of the above)");
  app.add_option("--min-token-length", c.min_token_length, "Shortest token the reviser adjudicates")
      ->capture_default_str();
  app.add_option("--max-candidates", c.max_candidates, "Cap on adjudicated tokens (0 = no cap)")
      ->capture_default_str();
  app.add_option("--summarizer-template", cli.summarizer_tmpl, "Override the summarizer prompt template");
  app.add_option("--generator-template", cli.generator_tmpl, "Override the generator prompt template");
  app.add_option("--baseline-template", cli.baseline_tmpl, "Override the baseline prompt template");
  app.add_option("--reviser-template", cli.reviser_tmpl, "Override the reviser prompt template");
  app.add_option("--exemplars", cli.exemplars, "JSONL file of worked examples for the generator");
}

void print_run(const RunOutcome& outcome) {
  if (outcome.ok) {
    std::cout << "wrote " << outcome.records.size() << " records to " << outcome.records_path.string() << '\n';
  } else {
    std::cerr << "run failed: " << outcome.error << '\n';
  }
  std::cout << "groups: " << outcome.groups.size() << "  fallback records: " << outcome.fallback_count
            << "  unique rules: " << outcome.unique_rules.rules.size() << "  LLM requests: " << outcome.stats.requests
            << " (cache hits " << outcome.stats.cache_hits << ")\n"
            << "manifest: " << outcome.manifest_path.string() << '\n';
}

int cmd_summarize(Cli& cli) {
  Session session(cli);
  const auto& c = cli.config;
  fs::create_directories(c.output_dir);
  auto schemas = load_schemas(c.schemas);
  if (schemas.empty()) throw ValidationError("no tables in " + c.schemas.string());
  auto templates = load_templates(c.templates);
  auto result = run_summarizer(schemas, c.summarizer_config(), session.gateway(), templates.summarizer);
  write_groups(result.groups, c.output_dir / "groups.jsonl");
  write_schemas(result.schemas, c.output_dir / "schemas.annotated.jsonl");
  std::cout << result.groups.size() << " groups over " << result.schemas.size() << " tables written to "
            << c.output_dir.string() << '\n';
  return 0;
}

int cmd_expand(Cli& cli) {
  Session session(cli);
  const auto& c = cli.config;
  fs::create_directories(c.output_dir);
  auto schemas = load_schemas(c.schemas);
  std::vector<TableGroup> groups;
  if (!cli.groups.empty()) groups = load_groups(cli.groups);
  auto templates = load_templates(c.templates);
  auto result = run_generator(schemas, groups, c.generator_config(), session.gateway(), templates);
  const auto out = c.output_dir / "e2.generated.jsonl";
  write_e2_records(result.records, out);
  std::cout << result.records.size() << " records (" << result.fallback_count << " fallback) written to "
            << out.string() << '\n';
  return 0;
}

int cmd_revise(Cli& cli) {
  Session session(cli);
  const auto& c = cli.config;
  fs::create_directories(c.output_dir);
  auto schemas = load_schemas(c.schemas);
  std::vector<TableGroup> groups;
  if (!cli.groups.empty()) groups = load_groups(cli.groups);
  auto records = load_e2_records(cli.records);
  auto templates = load_templates(c.templates);
  auto result = run_reviser(records, groups, schemas, session.gateway(), c.reviser_config(), templates.reviser);
  write_e2_records(result.records, c.output_dir / "e2.jsonl");
  write_unique_rules(result.unique_rules.rules, c.output_dir / "unique_rules.jsonl");
  std::cout << result.adjudicated.size() << " tokens adjudicated, " << result.unique_rules.rules.size()
            << " unique rules applied; records written to " << (c.output_dir / "e2.jsonl").string() << '\n';
  return 0;
}

int cmd_run(Cli& cli) {
  Session session(cli);
  auto outcome = run_pipeline(cli.config, session.gateway());
  print_run(outcome);
  return outcome.ok ? 0 : 1;
}

int cmd_eval(Cli& cli) {
  const auto& c = cli.config;
  auto report = run_eval(cli.records, c.gold, c.synonyms, c.embedder, cli.dataset);
  const fs::path out = cli.report.empty() ? c.output_dir / "report.json" : fs::path(cli.report);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  write_report(report, out);
  std::cout << render_report_table(report);
  if (report.unmatched) std::cerr << "warning: " << report.unmatched << " unmatched (table, column) keys skipped\n";
  std::cout << "report: " << out.string() << '\n';
  return 0;
}

int cmd_sweep(Cli& cli) {
  Session session(cli);
  auto report = run_sweep(cli.config, cli.sweep_param, cli.sweep_values, session.gateway());
  std::cout << render_sweep_table(report);
  for (const auto& r : report.rows)
    if (!r.ok) std::cerr << cli.sweep_param << "=" << r.value << " failed: " << r.error << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Expand abbreviated table column names with an LLM and evaluate the expansions"};
  app.set_config("--config", "", "Config file (TOML or INI) providing any option");
  app.require_subcommand(1);
  app.fallthrough();  // shared options may follow the subcommand name
  Cli cli;
  auto& c = cli.config;

  auto* summarize = app.add_subcommand("summarize", "Cluster tables into groups and summarize them");
  summarize->add_option("--schemas", c.schemas, "Schema file (JSONL)")->required();
  summarize->add_option("--out-dir", c.output_dir, "Output directory")->capture_default_str();
  add_llm_options(*summarize, cli);
  add_pipeline_options(*summarize, cli);

  auto* expand = app.add_subcommand("expand", "Generate E2 records for every column");
  expand->add_option("--schemas", c.schemas, "Schema file, annotated by summarize or raw")->required();
  expand->add_option("--groups", cli.groups, "Groups file written by summarize");
  expand->add_option("--out-dir", c.output_dir, "Output directory")->capture_default_str();
  add_llm_options(*expand, cli);
  add_pipeline_options(*expand, cli);

  auto* revise = app.add_subcommand("revise", "Make inconsistent token expansions uniform");
  revise->add_option("--schemas", c.schemas, "Schema file")->required();
  revise->add_option("--groups", cli.groups, "Groups file written by summarize");
  revise->add_option("--records", cli.records, "E2 records written by expand")->required();
  revise->add_option("--out-dir", c.output_dir, "Output directory")->capture_default_str();
  add_llm_options(*revise, cli);
  add_pipeline_options(*revise, cli);

  auto* run = app.add_subcommand("run", "Summarize, expand and revise in one go");
  run->add_option("--schemas", c.schemas, "Schema file (JSONL)")->required();
  run->add_option("--out-dir", c.output_dir, "Output directory")->capture_default_str();
  add_llm_options(*run, cli);
  add_pipeline_options(*run, cli);

  auto* eval = app.add_subcommand("eval", "Score E2 records against gold expansions");
  eval->add_option("--records", cli.records, "E2 records (JSONL)")->required();
  eval->add_option("--gold", c.gold, "Gold labels (JSONL)")->required();
  eval->add_option("--synonyms", c.synonyms, "Synonym lexicon");
  eval->add_option("--embedder", c.embedder, "offline-trigram or remote:<endpoint>")->capture_default_str();
  eval->add_option("--dataset", cli.dataset, "Dataset label for the report");
  eval->add_option("--report", cli.report, "Report path (default <out-dir>/report.json)");
  eval->add_option("--out-dir", c.output_dir, "Output directory")->capture_default_str();

  auto* sweep = app.add_subcommand("sweep", "Run the pipeline once per value of k or p");
  sweep->add_option("--param", cli.sweep_param, "Parameter to vary")->required()->check(CLI::IsMember({"k", "p"}));
  sweep->add_option("--values", cli.sweep_values, "Values, comma separated")->required()->delimiter(',');
  sweep->add_option("--schemas", c.schemas, "Schema file (JSONL)")->required();
  sweep->add_option("--gold", c.gold, "Gold labels; enables per-value evaluation");
  sweep->add_option("--synonyms", c.synonyms, "Synonym lexicon");
  sweep->add_option("--embedder", c.embedder, "offline-trigram or remote:<endpoint>")->capture_default_str();
  sweep->add_option("--out-dir", c.output_dir, "Output directory")->capture_default_str();
  add_llm_options(*sweep, cli);
  add_pipeline_options(*sweep, cli);

  auto* templates = app.add_subcommand("templates", "Write the builtin prompt templates for editing");
  templates->add_option("--out", cli.templates_out, "Directory")->required();

  CLI11_PARSE(app, argc, argv);
  finalize(cli);

  try {
    if (*summarize) return cmd_summarize(cli);
    if (*expand) return cmd_expand(cli);
    if (*revise) return cmd_revise(cli);
    if (*run) return cmd_run(cli);
    if (*eval) return cmd_eval(cli);
    if (*sweep) return cmd_sweep(cli);
    if (*templates) {
      write_builtin_templates(cli.templates_out);
      std::cout << "templates written to " << cli.templates_out << '\n';
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
