#include "colexpand/evaluator.hpp"

#include <algorithm>
#include <map>

#include "colexpand/text.hpp"

namespace colexpand {

namespace {

std::vector<std::string> distinct_words(std::string_view normalized) {
  auto words = text::split_whitespace(normalized);
  std::sort(words.begin(), words.end());
  words.erase(std::unique(words.begin(), words.end()), words.end());
  return words;
}

double harmonic(double p, double r) { return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r); }

// Splits words into lexicon segments: at each position the longest phrase
// found in the lexicon, otherwise the single word. Returns (text, class) with
// class -1 for plain words.
std::vector<std::pair<std::string, int>> segment(const std::vector<std::string>& words,
                                                 const SynonymLexicon& lexicon) {
  std::vector<std::pair<std::string, int>> out;
  const std::size_t longest = lexicon.max_phrase_words();
  std::size_t i = 0;
  while (i < words.size()) {
    int cls = -1;
    std::size_t len = 1;
    for (std::size_t n = std::min(longest, words.size() - i); n >= 1; --n) {
      std::string phrase = words[i];
      for (std::size_t k = 1; k < n; ++k) phrase += " " + words[i + k];
      if (int c = lexicon.class_of(phrase); c >= 0) {
        cls = c;
        len = n;
        break;
      }
    }
    std::string piece = words[i];
    for (std::size_t k = 1; k < len; ++k) piece += " " + words[i + k];
    out.emplace_back(std::move(piece), cls);
    i += len;
  }
  return out;
}

}  // namespace

std::string normalize(std::string_view phrase) { return text::normalize_phrase(phrase); }

bool exact_match(std::string_view x, std::string_view g) { return normalize(x) == normalize(g); }

double word_f1(std::string_view x, std::string_view g) {
  const auto xs = distinct_words(normalize(x));
  const auto gs = distinct_words(normalize(g));
  if (xs.empty() && gs.empty()) return 1.0;
  if (xs.empty() || gs.empty()) return 0.0;
  std::vector<std::string> common;
  std::set_intersection(xs.begin(), xs.end(), gs.begin(), gs.end(), std::back_inserter(common));
  const double p = static_cast<double>(common.size()) / static_cast<double>(xs.size());
  const double r = static_cast<double>(common.size()) / static_cast<double>(gs.size());
  return harmonic(p, r);
}

double word_similarity(const std::string& a, const std::string& b, Embedder& embedder) {
  if (a == b) return 1.0;
  const auto va = embedder.embed(a);
  const auto vb = embedder.embed(b);
  if (va.size() != vb.size()) throw ValidationError("embedder returned vectors of different sizes");
  double dot = 0.0;
  for (std::size_t i = 0; i < va.size(); ++i) dot += static_cast<double>(va[i]) * vb[i];
  return std::clamp(dot, 0.0, 1.0);
}

double embedding_f1(std::string_view x, std::string_view g, Embedder& embedder) {
  const auto xs = distinct_words(normalize(x));
  const auto gs = distinct_words(normalize(g));
  if (xs.empty() && gs.empty()) return 1.0;
  if (xs.empty() || gs.empty()) return 0.0;

  std::vector<std::vector<double>> sim(xs.size(), std::vector<double>(gs.size()));
  for (std::size_t i = 0; i < xs.size(); ++i)
    for (std::size_t j = 0; j < gs.size(); ++j) sim[i][j] = word_similarity(xs[i], gs[j], embedder);

  double p = 0.0, r = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) p += *std::max_element(sim[i].begin(), sim[i].end());
  for (std::size_t j = 0; j < gs.size(); ++j) {
    double best = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) best = std::max(best, sim[i][j]);
    r += best;
  }
  p /= static_cast<double>(xs.size());
  r /= static_cast<double>(gs.size());
  return harmonic(p, r);
}

std::string canonicalize(std::string_view phrase, const SynonymLexicon& lexicon) {
  const auto norm = normalize(phrase);
  if (lexicon.empty()) return norm;
  std::vector<std::string> parts;
  for (auto& [piece, cls] : segment(text::split_whitespace(norm), lexicon))
    parts.push_back(cls >= 0 ? lexicon.representative(cls) : piece);
  return text::join(parts, " ");
}

GoldVariations gold_variations(std::string_view g, const SynonymLexicon& lexicon, std::size_t cap) {
  GoldVariations out;
  const auto norm = normalize(g);
  out.phrases.insert(norm);
  if (lexicon.empty()) return out;

  std::vector<std::vector<std::string>> options;
  for (auto& [piece, cls] : segment(text::split_whitespace(norm), lexicon))
    options.push_back(cls >= 0 ? lexicon.classes()[cls] : std::vector<std::string>{piece});

  // Odometer over the option lists.
  std::vector<std::size_t> pick(options.size(), 0);
  while (true) {
    if (out.phrases.size() >= cap) {
      out.truncated = true;
      break;
    }
    std::vector<std::string> parts;
    for (std::size_t i = 0; i < options.size(); ++i) parts.push_back(options[i][pick[i]]);
    out.phrases.insert(text::join(parts, " "));

    std::size_t i = 0;
    while (i < options.size() && ++pick[i] == options[i].size()) pick[i++] = 0;
    if (i == options.size()) break;
  }
  return out;
}

bool synonym_aware_em(std::string_view x, std::string_view g, const SynonymLexicon& lexicon) {
  return canonicalize(x, lexicon) == canonicalize(g, lexicon);
}

double synonym_aware_word_f1(std::string_view x, std::string_view g, const SynonymLexicon& lexicon) {
  return std::max(word_f1(x, g), word_f1(canonicalize(x, lexicon), canonicalize(g, lexicon)));
}

double synonym_aware_embedding_f1(std::string_view x, std::string_view g, const SynonymLexicon& lexicon,
                                  Embedder& embedder) {
  const double plain = embedding_f1(x, g, embedder);
  if (lexicon.empty()) return plain;
  return std::max(plain, embedding_f1(canonicalize(x, lexicon), canonicalize(g, lexicon), embedder));
}

ColumnScore score_column(const std::string& table, const std::string& column, const std::string& prediction,
                         const std::string& gold, const SynonymLexicon& lexicon, Embedder& embedder) {
  ColumnScore s;
  s.table = table;
  s.column = column;
  s.prediction = prediction;
  s.gold = gold;
  s.em = exact_match(prediction, gold);
  s.word_f1 = word_f1(prediction, gold);
  s.embed_f1 = embedding_f1(prediction, gold, embedder);
  s.syn_em = s.em || synonym_aware_em(prediction, gold, lexicon);
  s.syn_word_f1 = synonym_aware_word_f1(prediction, gold, lexicon);
  s.syn_embed_f1 = synonym_aware_embedding_f1(prediction, gold, lexicon, embedder);
  return s;
}

MetricReport evaluate(const std::vector<Prediction>& predictions, const std::vector<GoldLabel>& gold,
                      const SynonymLexicon& lexicon, Embedder& embedder, std::string dataset) {
  std::map<std::pair<std::string, std::string>, const Prediction*> by_key;
  for (const auto& p : predictions) by_key.emplace(std::make_pair(p.table, p.column), &p);

  MetricReport report;
  report.dataset = std::move(dataset);
  report.embedder = embedder.name();
  std::size_t used = 0;
  for (const auto& label : gold) {
    auto it = by_key.find({label.table_name, label.column_raw});
    if (label.excluded) {
      ++report.excluded;
      if (it != by_key.end()) ++used;
      continue;
    }
    if (it == by_key.end()) {
      ++report.unmatched;
      continue;
    }
    ++used;
    report.per_column.push_back(score_column(label.table_name, label.column_raw, it->second->expansion,
                                             label.gold_expansion, lexicon, embedder));
  }
  report.unmatched += by_key.size() - used;

  auto& a = report.aggregates;
  a.columns = report.per_column.size();
  if (a.columns == 0) throw ValidationError("no evaluable columns");
  for (const auto& c : report.per_column) {
    a.em += c.em ? 1.0 : 0.0;
    a.word_f1 += c.word_f1;
    a.embed_f1 += c.embed_f1;
    a.syn_em += c.syn_em ? 1.0 : 0.0;
    a.syn_word_f1 += c.syn_word_f1;
    a.syn_embed_f1 += c.syn_embed_f1;
  }
  const auto n = static_cast<double>(a.columns);
  a.em /= n;
  a.word_f1 /= n;
  a.embed_f1 /= n;
  a.syn_em /= n;
  a.syn_word_f1 /= n;
  a.syn_embed_f1 /= n;
  return report;
}

}  // namespace colexpand
