#include "support/properties.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <set>

#include "colexpand/core_model.hpp"
#include "colexpand/evaluator.hpp"
#include "colexpand/sampling.hpp"
#include "colexpand/text.hpp"

namespace colexpand::testing {

namespace {

std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

std::string random_string(SeededRng& rng, std::size_t min_len, std::size_t max_len, std::string_view alphabet) {
  const std::size_t len = min_len + rng.below(max_len - min_len + 1);
  std::string s;
  for (std::size_t i = 0; i < len; ++i) s.push_back(alphabet[rng.below(alphabet.size())]);
  return s;
}

void record_failure(PropertyOutcome& out, const std::string& what) {
  ++out.disagreements;
  if (out.first_failure.empty()) out.first_failure = what;
}

}  // namespace

bool subsequence_oracle(const std::string& token, const std::string& expansion) {
  const auto t = lower(token), e = lower(expansion);
  std::map<std::pair<std::size_t, std::size_t>, bool> memo;
  auto fits = [&](auto&& self, std::size_t i, std::size_t j) -> bool {
    if (i == t.size()) return true;
    if (j == e.size()) return false;
    if (auto it = memo.find({i, j}); it != memo.end()) return it->second;
    bool r = self(self, i, j + 1) || (t[i] == e[j] && self(self, i + 1, j + 1));
    memo[{i, j}] = r;
    return r;
  };
  return fits(fits, 0, 0);
}

PropertyOutcome check_subsequence(std::uint64_t seed, std::size_t cases) {
  constexpr std::string_view kAlphabet = "abcdeABCDE 1_";
  SeededRng rng(seed);
  PropertyOutcome out;
  for (std::size_t n = 0; n < cases; ++n) {
    const auto token = random_string(rng, 1, 12, kAlphabet);
    std::string expansion;
    if (rng.below(2) == 0) {
      // Interleave the token's characters with noise so a match exists.
      for (char c : token) {
        expansion += random_string(rng, 0, 1, kAlphabet);
        expansion.push_back(rng.below(2) ? static_cast<char>(std::toupper(static_cast<unsigned char>(c))) : c);
      }
      if (expansion.size() > 12) expansion.resize(12);
    } else {
      expansion = random_string(rng, 0, 12, kAlphabet);
    }
    ++out.cases;
    if (is_valid_expansion(token, expansion) != subsequence_oracle(token, expansion))
      record_failure(out, "token '" + token + "' expansion '" + expansion + "'");
    if (!is_valid_expansion(token, token)) record_failure(out, "reflexivity fails for '" + token + "'");
  }
  return out;
}

PropertyOutcome check_reconstruction(std::uint64_t seed, std::size_t cases) {
  constexpr std::string_view kTokenChars = "abcXYZ019";
  const std::vector<std::string> kCandidateDelims = {"_", "-", " ", ".", "", "/", "__", ":"};
  SeededRng rng(seed);
  PropertyOutcome out;
  for (std::size_t n = 0; n < cases; ++n) {
    ++out.cases;
    const std::size_t count = 1 + rng.below(5);
    TokenSequence seq;
    for (std::size_t i = 0; i < count; ++i) {
      seq.tokens.push_back(random_string(rng, 1, 4, kTokenChars));
      if (i > 0) seq.delimiters.push_back(kCandidateDelims[rng.below(kCandidateDelims.size())]);
    }

    std::string literal;
    for (std::size_t i = 0; i < count; ++i) literal += (i ? seq.delimiters[i - 1] : "") + seq.tokens[i];

    bool delims_ok = true;
    for (const auto& d : seq.delimiters)
      delims_ok = delims_ok && (d == "_" || d == "-" || d == " " || d == "." || d.empty());

    // Sometimes validate against a raw name that differs from the rebuild.
    std::string raw = literal;
    if (rng.below(4) == 0) {
      const auto pos = rng.below(raw.size());
      raw[pos] = raw[pos] == 'q' ? 'r' : 'q';
    }
    if (text::trim(raw).empty()) continue;
    const ColumnName column(raw);

    const bool expected = delims_ok && literal == raw;
    if (validate_token_sequence(column, seq) != expected)
      record_failure(out, "sequence rebuilding '" + literal + "' against raw '" + raw + "'");

    if (expected) {
      auto upper = seq.tokens;
      for (auto& t : upper)
        for (auto& c : t) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
      const auto aligned = align_tokens(column, upper);
      if (!aligned || aligned->reconstruct() != raw || !validate_token_sequence(column, *aligned))
        record_failure(out, "align_tokens failed to recover '" + raw + "'");
      else
        for (std::size_t i = 0; i < count; ++i)
          if (!text::iequals(aligned->tokens[i], seq.tokens[i]))
            record_failure(out, "align_tokens changed token " + std::to_string(i) + " of '" + raw + "'");
    }
  }
  return out;
}

std::vector<MetricCase> make_metric_cases(std::uint64_t seed, std::size_t cases) {
  static const std::vector<std::string> kVocab = {
      "geography", "geographical", "photo",  "picture",  "id",     "identifier", "num",   "number",
      "qty",       "quantity",     "emp",    "employee", "dept",   "department", "addr",  "address",
      "date",      "day",          "time",   "phone",    "salary", "code",       "name",  "credit",
      "location",  "total",        "amount", "zip",      "city",   "state",      "order", "line"};
  SeededRng rng(seed);
  std::vector<MetricCase> out;
  for (std::size_t n = 0; n < cases; ++n) {
    auto words = kVocab;
    rng.shuffle(words);
    std::size_t next = 0;

    const std::size_t class_count = rng.below(6);  // 0..5
    std::vector<std::vector<std::string>> classes;
    for (std::size_t c = 0; c < class_count; ++c) {
      const std::size_t size = 2 + rng.below(2);
      std::vector<std::string> cls;
      for (std::size_t m = 0; m < size; ++m) {
        const std::size_t len = 1 + (rng.below(4) == 0 ? 1 : 0);
        std::vector<std::string> phrase(words.begin() + static_cast<std::ptrdiff_t>(next),
                                        words.begin() + static_cast<std::ptrdiff_t>(next + len));
        next += len;
        cls.push_back(text::join(phrase, " "));
      }
      classes.push_back(std::move(cls));
    }
    MetricCase mc;
    mc.lexicon = SynonymLexicon::from_classes(classes);

    // Gold: lexicon phrases and plain words, 1..6 words in total.
    const std::size_t target = 1 + rng.below(6);
    std::vector<std::string> gold_words;
    while (gold_words.size() < target) {
      if (!classes.empty() && rng.below(2) == 0) {
        const auto& cls = classes[rng.below(classes.size())];
        const auto parts = text::split_whitespace(cls[rng.below(cls.size())]);
        if (gold_words.size() + parts.size() > 6) break;
        gold_words.insert(gold_words.end(), parts.begin(), parts.end());
      } else {
        gold_words.push_back(words[next + rng.below(words.size() - next)]);
      }
    }
    mc.gold = text::join(gold_words, " ");

    // Prediction: a closure member, a perturbed gold, or a casing/punctuation variant.
    const auto closure = variation_closure(mc.gold, mc.lexicon);
    switch (rng.below(4)) {
      case 0:
        mc.prediction = closure[rng.below(closure.size())];
        break;
      case 1: {
        auto base = text::split_whitespace(closure[rng.below(closure.size())]);
        base[rng.below(base.size())] = words[rng.below(words.size())];
        mc.prediction = text::join(base, " ");
        break;
      }
      case 2: {
        auto base = text::split_whitespace(closure[rng.below(closure.size())]);
        if (base.size() > 1) base.erase(base.begin() + static_cast<std::ptrdiff_t>(rng.below(base.size())));
        else base.push_back(words[rng.below(words.size())]);
        mc.prediction = text::join(base, " ");
        break;
      }
      default: {
        auto p = closure[rng.below(closure.size())];
        if (!p.empty()) p[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(p[0])));
        mc.prediction = "  " + p + ". ";
        break;
      }
    }
    out.push_back(std::move(mc));
  }
  return out;
}

std::vector<std::string> variation_closure(const std::string& gold, const SynonymLexicon& lexicon) {
  std::set<std::string> seen{normalize(gold)};
  std::vector<std::string> frontier(seen.begin(), seen.end());
  while (!frontier.empty()) {
    const auto phrase = frontier.back();
    frontier.pop_back();
    const auto words = text::split_whitespace(phrase);
    for (const auto& cls : lexicon.classes()) {
      for (const auto& from : cls) {
        const auto from_words = text::split_whitespace(from);
        for (std::size_t i = 0; i + from_words.size() <= words.size(); ++i) {
          if (!std::equal(from_words.begin(), from_words.end(), words.begin() + static_cast<std::ptrdiff_t>(i)))
            continue;
          for (const auto& to : cls) {
            std::vector<std::string> next(words.begin(), words.begin() + static_cast<std::ptrdiff_t>(i));
            next.push_back(to);
            next.insert(next.end(), words.begin() + static_cast<std::ptrdiff_t>(i + from_words.size()), words.end());
            auto joined = text::join(next, " ");
            if (seen.insert(joined).second) frontier.push_back(joined);
          }
        }
      }
    }
  }
  return {seen.begin(), seen.end()};
}

PropertyOutcome check_synonym_em_equivalence(const std::vector<MetricCase>& cases) {
  PropertyOutcome out;
  for (const auto& c : cases) {
    ++out.cases;
    const auto closure = variation_closure(c.gold, c.lexicon);
    const bool oracle = std::find(closure.begin(), closure.end(), normalize(c.prediction)) != closure.end();
    if (synonym_aware_em(c.prediction, c.gold, c.lexicon) != oracle)
      record_failure(out, "x='" + c.prediction + "' g='" + c.gold + "'");
    const auto variations = gold_variations(c.gold, c.lexicon);
    if (!variations.truncated && std::vector<std::string>(variations.phrases.begin(), variations.phrases.end()) != closure)
      record_failure(out, "gold_variations differs from closure for g='" + c.gold + "'");
  }
  return out;
}

PropertyOutcome check_monotonicity(const std::vector<MetricCase>& cases) {
  TrigramEmbedder embedder;
  PropertyOutcome out;
  for (const auto& c : cases) {
    ++out.cases;
    const auto& x = c.prediction;
    const auto& g = c.gold;
    const bool em = exact_match(x, g);
    const double wf = word_f1(x, g);
    if (em && !synonym_aware_em(x, g, c.lexicon)) record_failure(out, "syn-EM < EM for '" + x + "'");
    if (synonym_aware_word_f1(x, g, c.lexicon) < wf) record_failure(out, "syn word F1 < word F1 for '" + x + "'");
    if (synonym_aware_embedding_f1(x, g, c.lexicon, embedder) < embedding_f1(x, g, embedder))
      record_failure(out, "syn embedding F1 < embedding F1 for '" + x + "'");
    if (wf != word_f1(g, x)) record_failure(out, "word F1 not symmetric for '" + x + "' / '" + g + "'");
    if (em && wf != 1.0) record_failure(out, "EM without word F1 = 1 for '" + x + "'");
  }
  return out;
}

}  // namespace colexpand::testing
