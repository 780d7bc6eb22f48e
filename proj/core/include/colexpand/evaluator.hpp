#pragma once

// Accuracy measures for predicted expansions: exact match, word-level F1,
// embedding F1, and synonym-aware versions of all three.
//
// All comparisons run on normalize()d phrases. Word sets use distinct words.

#include <cstddef>
#include <memory>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "colexpand/dataset_io.hpp"
#include "colexpand/metric_report.hpp"

namespace colexpand {

// Maps a word to a unit vector of fixed dimension.
class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual std::vector<float> embed(const std::string& word) = 0;
  virtual std::string name() const = 0;
};

// Offline fallback: character 2- and 3-grams of "#word#" hashed into `dim`
// buckets, L2-normalized. Deterministic, no network.
class TrigramEmbedder : public Embedder {
 public:
  explicit TrigramEmbedder(std::size_t dim = 512);
  std::vector<float> embed(const std::string& word) override;
  std::string name() const override { return "offline-trigram"; }

 private:
  std::size_t dim_;
};

// OpenAI-compatible embeddings endpoint. Results are memoized per word.
class RemoteEmbedder : public Embedder {
 public:
  RemoteEmbedder(std::string endpoint, std::string model = "text-embedding-3-small",
                 std::string api_key_env = "COLEXPAND_API_KEY");
  std::vector<float> embed(const std::string& word) override;
  std::string name() const override { return "remote:" + endpoint_; }

 private:
  struct Impl;
  std::shared_ptr<Impl> impl_;
  std::string endpoint_;
};

// "offline-trigram" or "remote:<endpoint>".
std::unique_ptr<Embedder> make_embedder(const std::string& spec);

std::string normalize(std::string_view phrase);

bool exact_match(std::string_view x, std::string_view g);

double word_f1(std::string_view x, std::string_view g);

// Cosine of two embeddings, clamped to [0, 1]; equal words score exactly 1.
double word_similarity(const std::string& a, const std::string& b, Embedder& embedder);

// Soft precision: mean over x's distinct words of the best similarity to any
// word of g; soft recall symmetric; harmonic mean.
double embedding_f1(std::string_view x, std::string_view g, Embedder& embedder);

// Replaces every lexicon phrase (longest match first, left to right,
// non-overlapping) with its class representative.
std::string canonicalize(std::string_view phrase, const SynonymLexicon& lexicon);

struct GoldVariations {
  std::set<std::string> phrases;
  // Enumeration hit the cap; phrases is incomplete and matching must use
  // canonical forms.
  bool truncated = false;
};

// Every phrase reachable from g by swapping lexicon phrases for class-mates.
GoldVariations gold_variations(std::string_view g, const SynonymLexicon& lexicon, std::size_t cap = 1024);

// Canonical-form equality. Agrees with membership in gold_variations
// whenever lexicon phrases cannot overlap.
bool synonym_aware_em(std::string_view x, std::string_view g, const SynonymLexicon& lexicon);

// The better of the plain score and the score on canonical forms, so the
// synonym-aware value never falls below the plain one.
double synonym_aware_word_f1(std::string_view x, std::string_view g, const SynonymLexicon& lexicon);
double synonym_aware_embedding_f1(std::string_view x, std::string_view g, const SynonymLexicon& lexicon,
                                  Embedder& embedder);

ColumnScore score_column(const std::string& table, const std::string& column, const std::string& prediction,
                         const std::string& gold, const SynonymLexicon& lexicon, Embedder& embedder);

struct Prediction {
  std::string table;
  std::string column;
  std::string expansion;
};

// Scores predictions against gold. Excluded labels are counted but not
// scored; labels without a prediction and predictions without a label are
// counted as unmatched. Throws ValidationError when nothing is evaluable.
MetricReport evaluate(const std::vector<Prediction>& predictions, const std::vector<GoldLabel>& gold,
                      const SynonymLexicon& lexicon, Embedder& embedder, std::string dataset = "");

}  // namespace colexpand
