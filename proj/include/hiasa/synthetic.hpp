#pragma once

#include <algorithm>
#include <array>
#include <random>
#include <string>
#include <vector>

#include "hiasa/corpus.hpp"

namespace hiasa {

// Generator for small corpora where polarity is keyed to marker words and
// only opinionated mentions of an aspect term are annotated. Plain mentions
// ("i used the screen today") are left unannotated, so recognising an
// aspect depends on nearby sentiment cues.

struct SyntheticOptions {
  std::size_t sentences = 24;
  std::uint64_t seed = 7;
  double distractor_prob = 0.3;   // chance of an unannotated plain mention
  std::size_t max_aspects = 2;
  std::string id_prefix = "syn";
};

namespace detail {

inline const std::vector<std::vector<std::string>>& aspect_terms() {
  static const std::vector<std::vector<std::string>> terms = {
      {"screen"}, {"battery", "life"}, {"keyboard"}, {"price"},      {"service"}, {"pasta"},
      {"wine", "list"}, {"staff"},    {"delivery", "time"}, {"sound"}, {"touch", "pad"}, {"pizza"}};
  return terms;
}

inline const std::array<std::vector<std::string>, kNumPolarities>& markers() {
  static const std::array<std::vector<std::string>, kNumPolarities> m = {{
      {"great", "excellent", "amazing"},
      {"awful", "terrible", "poor"},
      {"average", "ordinary", "standard"},
  }};
  return m;
}

}  // namespace detail

inline std::vector<SentenceExample> generate_synthetic(const SyntheticOptions& opt) {
  std::mt19937_64 rng(opt.seed);
  auto pick = [&rng](std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng); };
  auto coin = [&rng](double p) { return std::bernoulli_distribution(p)(rng); };
  const auto& terms = detail::aspect_terms();

  std::vector<SentenceExample> out;
  for (std::size_t s = 0; s < opt.sentences; ++s) {
    SentenceExample ex;
    ex.id = opt.id_prefix + "-" + std::to_string(s);
    auto push = [&ex](const std::vector<std::string>& w) { ex.tokens.insert(ex.tokens.end(), w.begin(), w.end()); };

    const std::size_t n_aspects = 1 + pick(std::max<std::size_t>(opt.max_aspects, 1));
    std::vector<std::size_t> used;
    for (std::size_t k = 0; k < n_aspects; ++k) {
      std::size_t t = pick(terms.size());
      while (std::find(used.begin(), used.end(), t) != used.end()) t = pick(terms.size());
      used.push_back(t);
      const auto pol = static_cast<Polarity>(pick(kNumPolarities));
      const auto& mk = detail::markers()[static_cast<std::size_t>(pol)];
      const std::string marker = mk[pick(mk.size())];
      if (k > 0) push({coin(0.5) ? "and" : "but"});
      std::size_t a_start = 0;
      switch (pick(3)) {
        case 0:
          push({"the"});
          a_start = ex.tokens.size();
          push(terms[t]);
          push({"is", marker});
          break;
        case 1:
          push({"i", "found", "the"});
          a_start = ex.tokens.size();
          push(terms[t]);
          push({"really", marker});
          break;
        default:
          push({marker});
          a_start = ex.tokens.size();
          push(terms[t]);
          break;
      }
      ex.aspects.push_back({a_start, a_start + terms[t].size() - 1, pol});
    }
    if (coin(opt.distractor_prob)) {
      std::size_t t = pick(terms.size());
      while (std::find(used.begin(), used.end(), t) != used.end()) t = pick(terms.size());
      push({"and", "i", "used", "the"});
      push(terms[t]);
      push({"today"});
    }
    push({"."});
    out.push_back(std::move(ex));
  }
  return out;
}

}  // namespace hiasa
