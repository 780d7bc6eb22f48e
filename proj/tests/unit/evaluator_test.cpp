#include "doctest.h"

#include <cmath>
#include <set>

#include "colexpand/evaluator.hpp"
#include "support/properties.hpp"

using namespace colexpand;

namespace {

SynonymLexicon lex(std::vector<std::vector<std::string>> classes) { return SynonymLexicon::from_classes(classes); }

// Replaces each word with the option list of its class (or itself) and
// enumerates the product directly.
std::set<std::string> cross_product(const std::vector<std::vector<std::string>>& slots) {
  std::set<std::string> out{""};
  for (const auto& options : slots) {
    std::set<std::string> next;
    for (const auto& prefix : out)
      for (const auto& o : options) next.insert(prefix.empty() ? o : prefix + " " + o);
    out = std::move(next);
  }
  return out;
}

}  // namespace

TEST_CASE("normalize") {
  CHECK(normalize("Employee  Salary ") == "employee salary");
  CHECK(normalize("Day-Time Phone") == "daytime phone");
  CHECK(normalize("employee salary") == "employee salary");
  CHECK(normalize("Café  No.1") == "café no1");
}

TEST_CASE("exact_match") {
  CHECK(exact_match("employee salary", "employee salary"));
  CHECK(exact_match("Employee Salary.", "employee  salary"));
  CHECK_FALSE(exact_match("geography identifier", "geographical identifier"));
  CHECK_FALSE(exact_match("picture credit", "photo credit"));
}

TEST_CASE("word_f1") {
  CHECK(word_f1("employee salary", "employee salary") == 1.0);
  CHECK(std::abs(word_f1("employee salary", "employee salary amount") - 0.8) < 1e-9);
  CHECK(word_f1("alpha beta", "gamma delta") == 0.0);
  CHECK(word_f1("", "") == 1.0);
  CHECK(word_f1("", "x") == 0.0);
  // Distinct words: repetition does not inflate precision.
  CHECK(word_f1("date date", "date") == 1.0);
}

TEST_CASE("embedding_f1") {
  TrigramEmbedder e;
  CHECK(embedding_f1("employee salary", "employee salary", e) == 1.0);
  CHECK(embedding_f1("salary employee", "employee salary", e) == 1.0);

  const double plain = word_f1("photo credit", "picture credit");
  const double soft = embedding_f1("photo credit", "picture credit", e);
  CHECK(word_similarity("photo", "picture", e) > 0.0);
  CHECK(soft > plain);
  CHECK(soft < 1.0);

  CHECK(word_similarity("x", "x", e) == 1.0);
  const double s = word_similarity("salary", "celery", e);
  CHECK(s >= 0.0);
  CHECK(s <= 1.0);
}

TEST_CASE("trigram embedder vectors are unit length") {
  TrigramEmbedder e(64);
  for (const char* w : {"a", "salary", "x1", "über"}) {
    auto v = e.embed(w);
    CHECK(v.size() == 64);
    double n = 0;
    for (float f : v) n += static_cast<double>(f) * f;
    CHECK(std::abs(n - 1.0) < 1e-6);
  }
  CHECK(make_embedder("offline-trigram")->name() == "offline-trigram");
  CHECK(make_embedder("remote:http://localhost:1/v1/embeddings")->name() == "remote:http://localhost:1/v1/embeddings");
  CHECK_THROWS_AS(make_embedder("bogus"), ValidationError);
}

TEST_CASE("canonicalize") {
  auto l = lex({{"geography", "geographical"}, {"identifier", "id"}, {"day time", "daytime"}});
  CHECK(canonicalize("Geographical ID", l) == "geographical id");
  CHECK(canonicalize("geography identifier", l) == "geographical id");
  CHECK(canonicalize("employee day time phone", l) == canonicalize("employee daytime phone", l));
  CHECK(canonicalize("anything", SynonymLexicon{}) == "anything");
}

TEST_CASE("gold_variations") {
  auto geo = lex({{"geography", "geographical"}});
  CHECK(gold_variations("geographical location", geo).phrases ==
        std::set<std::string>{"geographical location", "geography location"});
  CHECK(gold_variations("Some Gold", SynonymLexicon{}).phrases == std::set<std::string>{"some gold"});

  auto three = lex({{"a1", "a2"}, {"b1", "b2"}, {"c1", "c2"}});
  auto v = gold_variations("a1 x b2 c1", three);
  CHECK(v.phrases.size() == 8);
  CHECK(v.phrases == cross_product({{"a1", "a2"}, {"x"}, {"b1", "b2"}, {"c1", "c2"}}));

  auto capped = gold_variations("a1 b1 c1", three, 5);
  CHECK(capped.truncated);
  CHECK(capped.phrases.size() == 5);
}

TEST_CASE("synonym-aware metrics") {
  auto geo = lex({{"geography", "geographical"}});
  CHECK(synonym_aware_em("geography location", "geographical location", geo));
  CHECK(synonym_aware_em("employee salary", "Employee Salary", geo));
  CHECK(synonym_aware_em("photo credit", "picture credit", lex({{"photo", "picture"}})));
  CHECK_FALSE(synonym_aware_em("photo credit", "picture credit", geo));

  CHECK(synonym_aware_word_f1("geography id", "geographical id", geo) == 1.0);
  CHECK(synonym_aware_word_f1("geography id", "geography id", geo) == 1.0);
  CHECK(synonym_aware_word_f1("employee salary", "employee salary amount", geo) ==
        word_f1("employee salary", "employee salary amount"));

  TrigramEmbedder e;
  CHECK(synonym_aware_embedding_f1("geography id", "geographical id", geo, e) == 1.0);
  CHECK(synonym_aware_embedding_f1("pay rate", "salary", geo, e) == embedding_f1("pay rate", "salary", e));

  // Canonical forms alone could lower the score: {a,b,c} vs {a,b} with a~b.
  auto ab = lex({{"a", "b"}});
  CHECK(synonym_aware_word_f1("a b c", "a b", ab) >= word_f1("a b c", "a b"));
}

TEST_CASE("score_column and evaluate") {
  TrigramEmbedder e;
  auto l = lex({{"identifier", "id"}});
  std::vector<GoldLabel> gold = {{"T", "a", "employee identifier", false},
                                 {"T", "b", "", true},
                                 {"T", "c", "city name", false},
                                 {"T", "d", "zip code", false}};
  std::vector<Prediction> preds = {{"T", "a", "employee id"}, {"T", "b", "whatever"}, {"T", "c", "City Name"},
                                   {"T", "zzz", "stray"}};
  auto report = evaluate(preds, gold, l, e, "unit");
  CHECK(report.aggregates.columns == 2);
  CHECK(report.excluded == 1);
  CHECK(report.unmatched == 2);  // d has no prediction, zzz has no gold
  CHECK(report.aggregates.em == 0.5);
  CHECK(report.aggregates.syn_em == 1.0);
  CHECK(report.embedder == "offline-trigram");

  CHECK_THROWS_AS(evaluate(preds, {}, l, e), ValidationError);
}

TEST_CASE("property: synonym EM agrees with exhaustive variations") {
  auto cases = colexpand::testing::make_metric_cases(21, 300);
  auto eq = colexpand::testing::check_synonym_em_equivalence(cases);
  INFO(eq.first_failure);
  CHECK(eq.ok());
  auto mono = colexpand::testing::check_monotonicity(cases);
  INFO(mono.first_failure);
  CHECK(mono.ok());
}
