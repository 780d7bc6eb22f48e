#include "colexpand/pipeline.hpp"

#include <chrono>
#include <fstream>
#include <sstream>

#include "colexpand/dataset_io.hpp"
#include "colexpand/evaluator.hpp"
#include "colexpand/text.hpp"
#include "json.hpp"

namespace colexpand {

using ordered_json = nlohmann::ordered_json;

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

std::string path_or_empty(const std::optional<std::filesystem::path>& p) { return p ? p->string() : ""; }

ordered_json config_to_json(const RunConfig& c) {
  ordered_json j;
  j["schemas"] = c.schemas.string();
  j["gold"] = c.gold.string();
  j["synonyms"] = c.synonyms.string();
  j["output_dir"] = c.output_dir.string();
  j["cache_dir"] = path_or_empty(c.cache_dir);
  j["mock_script"] = path_or_empty(c.mock_script);
  j["templates"] = {{"summarizer", path_or_empty(c.templates.summarizer)},
                    {"generator", path_or_empty(c.templates.generator)},
                    {"baseline", path_or_empty(c.templates.baseline)},
                    {"reviser", path_or_empty(c.templates.reviser)}};
  j["exemplars"] = path_or_empty(c.exemplars);
  j["model_id"] = c.model_id;
  j["k"] = c.k;
  j["p"] = c.p;
  j["q"] = c.q;
  j["seed"] = c.seed;
  j["shuffle_tables"] = c.shuffle_tables;
  j["no_context"] = c.no_context;
  j["no_table_names"] = c.no_table_names;
  j["no_rules"] = c.no_rules;
  j["no_cot"] = c.no_cot;
  j["no_reviser"] = c.no_reviser;
  j["baseline"] = c.baseline;
  j["parallelism"] = c.parallelism;
  j["min_token_length"] = c.min_token_length;
  j["max_candidates"] = c.max_candidates;
  return j;
}

GatewayStats diff(const GatewayStats& after, const GatewayStats& before) {
  return {after.requests - before.requests, after.cache_hits - before.cache_hits,
          after.provider_calls - before.provider_calls, after.retries - before.retries};
}

void write_manifest(const RunConfig& config, const RunOutcome& outcome, const std::vector<std::string>& flagged,
                    const std::filesystem::path& path) {
  ordered_json m;
  m["status"] = outcome.ok ? "ok" : "failed";
  if (!outcome.ok) m["error"] = outcome.error;
  m["config"] = config_to_json(config);
  m["table_order"] = outcome.table_order;
  m["counts"] = {{"tables", outcome.schemas.size()},
                 {"groups", outcome.groups.size()},
                 {"records", outcome.records.size()},
                 {"fallback_records", outcome.fallback_count},
                 {"unique_rules", outcome.unique_rules.rules.size()}};
  m["fallback_columns"] = flagged;
  m["gateway"] = {{"requests", outcome.stats.requests},
                  {"cache_hits", outcome.stats.cache_hits},
                  {"cache_hit_rate", outcome.stats.cache_hit_rate()},
                  {"provider_calls", outcome.stats.provider_calls},
                  {"retries", outcome.stats.retries}};
  m["timing_ms"] = {{"summarize", outcome.timings.summarize_ms},
                    {"expand", outcome.timings.expand_ms},
                    {"revise", outcome.timings.revise_ms}};
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write manifest '" + path.string() + "'");
  out << m.dump(2) << '\n';
}

}  // namespace

void RunConfig::validate() const {
  if (k < 1) throw ValidationError("k must be >= 1");
  if (p < 1) throw ValidationError("p must be >= 1");
  if (parallelism < 1) throw ValidationError("parallelism must be >= 1");
}

RunConfig RunConfig::effective() const {
  RunConfig c = *this;
  if (c.baseline) {
    c.no_context = c.no_rules = c.no_cot = c.no_reviser = true;
    c.no_table_names = true;
  }
  return c;
}

SummarizerConfig RunConfig::summarizer_config() const {
  SummarizerConfig s;
  s.batch_size_k = k;
  s.seed = seed;
  s.shuffle_tables = shuffle_tables;
  s.parallelism = parallelism;
  s.model_id = model_id;
  return s;
}

GeneratorConfig RunConfig::generator_config() const {
  const auto c = effective();
  GeneratorConfig g;
  g.batch_size_p = c.p;
  g.context_sample_q = c.q;
  g.seed = c.seed;
  g.rules_enabled = !c.no_rules;
  g.cot_enabled = !c.no_cot;
  g.context_enabled = !c.no_context;
  g.table_names_enabled = !c.no_table_names;
  g.baseline = c.baseline;
  g.parallelism = c.parallelism;
  g.model_id = c.model_id;
  if (c.exemplars) g.exemplars = load_exemplars(*c.exemplars);
  return g;
}

ReviserConfig RunConfig::reviser_config() const {
  const auto c = effective();
  ReviserConfig r;
  r.min_token_length = c.min_token_length;
  r.max_candidates = c.max_candidates;
  r.context_enabled = !c.no_context;
  r.table_names_enabled = !c.no_table_names;
  r.parallelism = c.parallelism;
  r.model_id = c.model_id;
  return r;
}

std::shared_ptr<Provider> make_provider(const RunConfig& config) {
  if (config.mock_script) return MockProvider::from_script(*config.mock_script);
  return std::make_shared<HttpChatProvider>(HttpProviderOptions{config.endpoint, config.api_key_env});
}

GatewayOptions make_gateway_options(const RunConfig& config) {
  GatewayOptions o;
  o.cache_dir = config.cache_dir;
  o.max_in_flight = config.parallelism;
  return o;
}

RunOutcome run_pipeline(const RunConfig& raw_config, LlmGateway& gateway) {
  const RunConfig config = raw_config.effective();
  config.validate();

  // Fail fast on inputs before touching the output directory.
  auto schemas = load_schemas(config.schemas);
  if (schemas.empty()) throw ValidationError("schema file '" + config.schemas.string() + "' has no tables");
  const auto templates = load_templates(config.templates);
  const auto gen_config = config.generator_config();
  const auto rev_config = config.reviser_config();

  std::filesystem::create_directories(config.output_dir);
  const auto dir = config.output_dir;
  // Leftovers from an earlier run in the same directory would be mistaken for this run's output.
  for (const char* name : {"groups.jsonl", "schemas.annotated.jsonl", "e2.generated.jsonl", "unique_rules.jsonl",
                           "e2.jsonl", "e2.partial.jsonl", "manifest.json"})
    std::filesystem::remove(dir / name);

  RunOutcome outcome;
  outcome.schemas = schemas;
  outcome.records_path = dir / "e2.jsonl";
  outcome.manifest_path = dir / "manifest.json";
  for (const auto& t : schemas) outcome.table_order.push_back(t.name);

  const auto stats_before = gateway.stats();
  std::vector<std::string> flagged;
  try {
    if (!config.no_context) {
      const auto start = Clock::now();
      auto summary = run_summarizer(schemas, config.summarizer_config(), gateway, templates.summarizer);
      outcome.timings.summarize_ms = ms_since(start);
      outcome.groups = std::move(summary.groups);
      outcome.schemas = std::move(summary.schemas);
      outcome.table_order = std::move(summary.batch_order);
      write_groups(outcome.groups, dir / "groups.jsonl");
      write_schemas(outcome.schemas, dir / "schemas.annotated.jsonl");
    }

    {
      const auto start = Clock::now();
      try {
        auto generated = run_generator(outcome.schemas, outcome.groups, gen_config, gateway, templates);
        outcome.generated = std::move(generated.records);
        outcome.fallback_count = generated.fallback_count;
        flagged = std::move(generated.flagged);
      } catch (const GeneratorError& e) {
        outcome.generated = e.partial();
        throw;
      }
      outcome.timings.expand_ms = ms_since(start);
      write_e2_records(outcome.generated, dir / "e2.generated.jsonl");
    }

    if (config.no_reviser) {
      outcome.records = outcome.generated;
    } else {
      const auto start = Clock::now();
      auto revised = run_reviser(outcome.generated, outcome.groups, outcome.schemas, gateway, rev_config,
                                 templates.reviser);
      outcome.timings.revise_ms = ms_since(start);
      outcome.records = std::move(revised.records);
      outcome.unique_rules = std::move(revised.unique_rules);
      write_unique_rules(outcome.unique_rules.rules, dir / "unique_rules.jsonl");
    }

    write_e2_records(outcome.records, outcome.records_path);
    outcome.ok = true;
  } catch (const Error& e) {
    outcome.ok = false;
    outcome.error = e.what();
    const auto& partial = outcome.records.empty() ? outcome.generated : outcome.records;
    write_e2_records(partial, dir / "e2.partial.jsonl");
    std::filesystem::remove(outcome.records_path);
  }

  outcome.stats = diff(gateway.stats(), stats_before);
  write_manifest(config, outcome, flagged, outcome.manifest_path);
  return outcome;
}

std::vector<Prediction> predictions_from_records(const std::vector<E2Record>& records) {
  std::vector<Prediction> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back({r.table_name, r.column.raw(), r.expansion});
  return out;
}

MetricReport run_eval(const std::filesystem::path& records, const std::filesystem::path& gold,
                      const std::filesystem::path& synonyms, const std::string& embedder_spec,
                      const std::string& dataset) {
  const auto e2 = load_e2_records(records);
  const auto labels = load_gold(gold);
  const SynonymLexicon lexicon = synonyms.empty() ? SynonymLexicon{} : load_synonyms(synonyms);
  auto embedder = make_embedder(embedder_spec);
  return evaluate(predictions_from_records(e2), labels, lexicon, *embedder, dataset);
}

SweepReport run_sweep(const RunConfig& config, const std::string& parameter,
                      const std::vector<std::size_t>& values, LlmGateway& gateway) {
  if (parameter != "k" && parameter != "p") throw ValidationError("sweep parameter must be k or p");
  if (values.empty()) throw ValidationError("sweep needs at least one value");

  SweepReport report;
  report.parameter = parameter;
  for (auto value : values) {
    SweepRow row;
    row.parameter = parameter;
    row.value = value;
    RunConfig run = config;
    (parameter == "k" ? run.k : run.p) = value;
    run.output_dir = config.output_dir / (parameter + "=" + std::to_string(value));
    try {
      auto outcome = run_pipeline(run, gateway);
      row.fallback_count = outcome.fallback_count;
      row.cache_hit_rate = outcome.stats.cache_hit_rate();
      if (!outcome.ok) throw Error(outcome.error);
      if (!config.gold.empty()) {
        auto metrics = run_eval(outcome.records_path, config.gold, config.synonyms, config.embedder,
                                parameter + "=" + std::to_string(value));
        write_report(metrics, run.output_dir / "report.json");
        row.metrics = metrics.aggregates;
      }
      row.ok = true;
    } catch (const Error& e) {
      row.error = e.what();
    } catch (const std::exception& e) {
      row.error = e.what();
    }
    report.rows.push_back(std::move(row));
  }

  std::filesystem::create_directories(config.output_dir);
  {
    std::ofstream tsv(config.output_dir / "sweep.tsv", std::ios::binary | std::ios::trunc);
    tsv << render_sweep_table(report);
  }
  ordered_json rows = ordered_json::array();
  for (const auto& r : report.rows) {
    ordered_json j;
    j[parameter] = r.value;
    j["ok"] = r.ok;
    if (!r.ok) j["error"] = r.error;
    j["fallback_records"] = r.fallback_count;
    j["cache_hit_rate"] = r.cache_hit_rate;
    if (r.metrics)
      j["metrics"] = {{"em", r.metrics->em},           {"word_f1", r.metrics->word_f1},
                      {"embed_f1", r.metrics->embed_f1}, {"syn_em", r.metrics->syn_em},
                      {"syn_word_f1", r.metrics->syn_word_f1}, {"syn_embed_f1", r.metrics->syn_embed_f1}};
    rows.push_back(std::move(j));
  }
  std::ofstream js(config.output_dir / "sweep.json", std::ios::binary | std::ios::trunc);
  js << ordered_json{{"parameter", parameter}, {"rows", rows}}.dump(2) << '\n';
  return report;
}

std::string render_sweep_table(const SweepReport& report) {
  std::ostringstream os;
  os << report.parameter << "\tstatus\tEM\tsyn-EM\tword-F1\tsyn-word-F1\tembed-F1\tsyn-embed-F1\tfallbacks\n";
  for (const auto& r : report.rows) {
    os << r.value << '\t' << (r.ok ? "ok" : "failed");
    if (r.metrics) {
      const auto& m = *r.metrics;
      for (double v : {m.em, m.syn_em, m.word_f1, m.syn_word_f1, m.embed_f1, m.syn_embed_f1})
        os << '\t' << format_percent(v);
    } else {
      for (int i = 0; i < 6; ++i) os << "\t-";
    }
    os << '\t' << r.fallback_count << '\n';
  }
  return os.str();
}

}  // namespace colexpand
