#pragma once

// End-to-end runs: summarize -> expand -> revise, evaluation against gold
// labels, and parameter sweeps. Every run leaves a manifest next to its
// outputs recording the configuration, table order and gateway statistics.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "colexpand/core_model.hpp"
#include "colexpand/evaluator.hpp"
#include "colexpand/generator.hpp"
#include "colexpand/llm_gateway.hpp"
#include "colexpand/metric_report.hpp"
#include "colexpand/prompts.hpp"
#include "colexpand/reviser.hpp"
#include "colexpand/summarizer.hpp"

namespace colexpand {

struct RunConfig {
  std::filesystem::path schemas;
  std::filesystem::path gold;
  std::filesystem::path synonyms;
  std::filesystem::path output_dir = "out";
  std::optional<std::filesystem::path> cache_dir;
  std::optional<std::filesystem::path> mock_script;
  std::optional<std::filesystem::path> record_script;
  TemplatePaths templates;
  std::optional<std::filesystem::path> exemplars;

  std::string model_id = std::string(kDefaultModel);
  std::string endpoint = "https://api.openai.com/v1/chat/completions";
  std::string api_key_env = "COLEXPAND_API_KEY";
  std::string embedder = "offline-trigram";

  std::size_t k = 30;
  std::size_t p = 10;
  std::size_t q = 100;
  std::uint64_t seed = 0;
  bool shuffle_tables = false;

  bool no_context = false;
  bool no_table_names = false;
  bool no_rules = false;
  bool no_cot = false;
  bool no_reviser = false;
  bool baseline = false;

  std::size_t parallelism = 4;
  std::size_t min_token_length = 2;
  std::size_t max_candidates = 0;

  void validate() const;
  // Copy with baseline's implied flags switched on.
  RunConfig effective() const;

  SummarizerConfig summarizer_config() const;
  GeneratorConfig generator_config() const;
  ReviserConfig reviser_config() const;
};

// Mock script when configured, otherwise the HTTP provider.
std::shared_ptr<Provider> make_provider(const RunConfig& config);
GatewayOptions make_gateway_options(const RunConfig& config);

struct StageTimings {
  double summarize_ms = 0, expand_ms = 0, revise_ms = 0;
};

struct RunOutcome {
  bool ok = false;
  std::string error;
  std::vector<TableGroup> groups;
  std::vector<TableSchema> schemas;  // annotated when the summarizer ran
  std::vector<E2Record> generated;
  std::vector<E2Record> records;     // final
  UniqueRuleSet unique_rules;
  std::size_t fallback_count = 0;
  std::vector<std::string> table_order;
  GatewayStats stats;  // this run only
  StageTimings timings;
  std::filesystem::path records_path;
  std::filesystem::path manifest_path;
};

// Output directory layout:
//   groups.jsonl, schemas.annotated.jsonl   summarizer (absent under no_context)
//   e2.generated.jsonl                      generator
//   unique_rules.jsonl                      reviser (absent under no_reviser)
//   e2.jsonl                                final records
//   e2.partial.jsonl                        only after a mid-run failure
//   manifest.json
// Input errors throw before anything is written. Failures after that are
// reported through RunOutcome::ok and the manifest's "status".
RunOutcome run_pipeline(const RunConfig& config, LlmGateway& gateway);

std::vector<Prediction> predictions_from_records(const std::vector<E2Record>& records);

// Loads records, gold and (optional) synonyms and scores them.
MetricReport run_eval(const std::filesystem::path& records, const std::filesystem::path& gold,
                      const std::filesystem::path& synonyms, const std::string& embedder_spec,
                      const std::string& dataset = "");

struct SweepRow {
  std::string parameter;
  std::size_t value = 0;
  bool ok = false;
  std::string error;
  std::optional<MetricAggregates> metrics;
  std::size_t fallback_count = 0;
  double cache_hit_rate = 0.0;
};

struct SweepReport {
  std::string parameter;
  std::vector<SweepRow> rows;
};

// One pipeline run (and evaluation, when gold is configured) per value, in
// output_dir/<param>=<value>/, sharing one gateway. Failures are recorded per
// row; the sweep continues. Writes sweep.tsv and sweep.json to output_dir.
SweepReport run_sweep(const RunConfig& config, const std::string& parameter,
                      const std::vector<std::size_t>& values, LlmGateway& gateway);

std::string render_sweep_table(const SweepReport& report);

}  // namespace colexpand
