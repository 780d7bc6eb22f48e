#include <benchmark/benchmark.h>

#include <string>
#include <vector>

#include "colexpand/core_model.hpp"
#include "colexpand/dataset_io.hpp"
#include "colexpand/evaluator.hpp"
#include "colexpand/llm_gateway.hpp"

using namespace colexpand;

namespace {

SynonymLexicon bench_lexicon() {
  return SynonymLexicon::from_classes({{"identifier", "id", "key"},
                                       {"telephone", "phone"},
                                       {"created", "creation"},
                                       {"shipping date", "ship date", "dispatch date"},
                                       {"quantity", "amount", "count"}});
}

void BM_is_valid_expansion(benchmark::State& state) {
  const std::vector<std::pair<std::string, std::string>> cases = {
      {"eDTPh", "employee daytime phone"}, {"qty", "quantity"}, {"geo_loc", "geographic location"},
      {"xyz", "customer number"},          {"dt", "date"},      {"EMPNO", "employee number"}};
  for (auto _ : state)
    for (const auto& [token, expansion] : cases) benchmark::DoNotOptimize(is_valid_expansion(token, expansion));
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(cases.size()));
}
BENCHMARK(BM_is_valid_expansion);

void BM_word_f1(benchmark::State& state) {
  for (auto _ : state)
    benchmark::DoNotOptimize(word_f1("employee daytime phone number", "employee day time telephone"));
}
BENCHMARK(BM_word_f1);

void BM_embedding_f1(benchmark::State& state) {
  TrigramEmbedder embedder;
  for (auto _ : state)
    benchmark::DoNotOptimize(embedding_f1("employee daytime phone number", "employee day time telephone", embedder));
}
BENCHMARK(BM_embedding_f1);

void BM_canonicalize(benchmark::State& state) {
  const auto lexicon = bench_lexicon();
  for (auto _ : state)
    benchmark::DoNotOptimize(canonicalize("order shipping date and creation quantity identifier", lexicon));
}
BENCHMARK(BM_canonicalize);

void BM_gold_variations(benchmark::State& state) {
  const auto lexicon = bench_lexicon();
  for (auto _ : state)
    benchmark::DoNotOptimize(gold_variations("identifier shipping date quantity created telephone", lexicon));
}
BENCHMARK(BM_gold_variations);

void BM_synonym_aware_em(benchmark::State& state) {
  const auto lexicon = bench_lexicon();
  for (auto _ : state)
    benchmark::DoNotOptimize(synonym_aware_em("order ship date id", "order dispatch date identifier", lexicon));
}
BENCHMARK(BM_synonym_aware_em);

void BM_cache_key(benchmark::State& state) {
  CompletionRequest request;
  request.system_text = std::string(4000, 's');
  request.user_text = std::string(static_cast<std::size_t>(state.range(0)), 'u');
  for (auto _ : state) benchmark::DoNotOptimize(cache_key(request));
  state.SetBytesProcessed(state.iterations() * (4000 + state.range(0)));
}
BENCHMARK(BM_cache_key)->Arg(1 << 10)->Arg(1 << 14);

void BM_gateway_cache_hit(benchmark::State& state) {
  auto mock = std::make_shared<MockProvider>();
  mock->set_responder([](const CompletionRequest&) { return std::optional<std::string>("reply"); });
  LlmGateway gateway(mock);
  CompletionRequest request;
  request.system_text = "system";
  request.user_text = "user";
  gateway.complete(request);
  for (auto _ : state) benchmark::DoNotOptimize(gateway.complete(request));
}
BENCHMARK(BM_gateway_cache_hit);

}  // namespace

BENCHMARK_MAIN();
