#pragma once

#include <algorithm>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "json.hpp"

namespace hiasa {

enum class Polarity { positive = 0, negative = 1, neutral = 2 };
inline constexpr std::size_t kNumPolarities = 3;

inline std::string_view to_string(Polarity p) {
  switch (p) {
    case Polarity::positive: return "positive";
    case Polarity::negative: return "negative";
    case Polarity::neutral: return "neutral";
  }
  return "?";
}

inline std::optional<Polarity> parse_polarity(std::string_view s) {
  if (s == "positive") return Polarity::positive;
  if (s == "negative") return Polarity::negative;
  if (s == "neutral") return Polarity::neutral;
  return std::nullopt;
}

/// Inclusive token span [start, end] with its gold polarity.
struct AspectAnnotation {
  std::size_t start = 0;
  std::size_t end = 0;
  Polarity polarity = Polarity::neutral;

  friend bool operator==(const AspectAnnotation&, const AspectAnnotation&) = default;
};

struct SentenceExample {
  std::string id;
  std::vector<std::string> tokens;
  std::vector<AspectAnnotation> aspects;

  std::size_t size() const noexcept { return tokens.size(); }
};

class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class ValidationError : public std::runtime_error {
 public:
  ValidationError(const std::string& id, const std::string& what)
      : std::runtime_error("record '" + id + "': " + what), id_(id) {}
  const std::string& record_id() const noexcept { return id_; }

 private:
  std::string id_;
};

/// Throws ValidationError unless every aspect lies inside the sentence and
/// no two aspects overlap.
inline void validate(const SentenceExample& ex) {
  if (ex.tokens.empty()) throw ValidationError(ex.id, "sentence has no tokens");
  const std::size_t n = ex.tokens.size();
  for (const auto& a : ex.aspects) {
    if (a.end < a.start)
      throw ValidationError(ex.id, "aspect end " + std::to_string(a.end) + " precedes start " +
                                       std::to_string(a.start));
    if (a.end >= n)
      throw ValidationError(ex.id, "aspect end " + std::to_string(a.end) +
                                       " beyond sentence length " + std::to_string(n));
  }
  std::vector<AspectAnnotation> sorted = ex.aspects;
  std::sort(sorted.begin(), sorted.end(),
            [](const auto& x, const auto& y) { return x.start < y.start; });
  for (std::size_t i = 1; i < sorted.size(); ++i)
    if (sorted[i].start <= sorted[i - 1].end)
      throw ValidationError(ex.id, "aspects (" + std::to_string(sorted[i - 1].start) + "," +
                                       std::to_string(sorted[i - 1].end) + ") and (" +
                                       std::to_string(sorted[i].start) + "," +
                                       std::to_string(sorted[i].end) + ") overlap");
}

/// Parses one record. `fallback_id` is used when the record carries no id.
inline SentenceExample parse_record(std::string_view line, std::size_t line_no,
                                    const std::string& fallback_id) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(line_no, std::string("malformed JSON: ") + e.what());
  }
  if (!j.is_object()) throw ParseError(line_no, "record is not an object");
  SentenceExample ex;
  if (auto it = j.find("id"); it != j.end()) {
    if (!it->is_string()) throw ParseError(line_no, "'id' must be a string");
    ex.id = it->get<std::string>();
  } else {
    ex.id = fallback_id;
  }
  auto toks = j.find("tokens");
  if (toks == j.end() || !toks->is_array()) throw ParseError(line_no, "missing 'tokens' array");
  for (const auto& t : *toks) {
    if (!t.is_string()) throw ParseError(line_no, "tokens must be strings");
    ex.tokens.push_back(t.get<std::string>());
  }
  auto asp = j.find("aspects");
  if (asp == j.end() || !asp->is_array()) throw ParseError(line_no, "missing 'aspects' array");
  for (const auto& a : *asp) {
    if (!a.is_object()) throw ParseError(line_no, "aspect must be an object");
    auto s = a.find("start");
    auto e = a.find("end");
    auto p = a.find("polarity");
    if (s == a.end() || e == a.end() || p == a.end())
      throw ParseError(line_no, "aspect needs 'start', 'end' and 'polarity'");
    if (!s->is_number_integer() || !e->is_number_integer())
      throw ParseError(line_no, "aspect boundaries must be integers");
    if (!p->is_string()) throw ParseError(line_no, "'polarity' must be a string");
    const auto pol = parse_polarity(p->get<std::string>());
    if (!pol) throw ParseError(line_no, "unknown polarity '" + p->get<std::string>() + "'");
    const auto si = s->get<long long>();
    const auto ei = e->get<long long>();
    if (si < 0 || ei < 0) throw ValidationError(ex.id, "negative aspect boundary");
    ex.aspects.push_back({static_cast<std::size_t>(si), static_cast<std::size_t>(ei), *pol});
  }
  validate(ex);
  return ex;
}

inline std::vector<SentenceExample> parse_dataset(std::istream& in) {
  std::vector<SentenceExample> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    out.push_back(parse_record(line, line_no, "line-" + std::to_string(line_no)));
  }
  return out;
}

inline std::vector<SentenceExample> parse_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset '" + path + "'");
  return parse_dataset(in);
}

inline nlohmann::json to_json(const SentenceExample& ex) {
  nlohmann::json aspects = nlohmann::json::array();
  for (const auto& a : ex.aspects)
    aspects.push_back({{"start", a.start}, {"end", a.end}, {"polarity", to_string(a.polarity)}});
  return {{"id", ex.id}, {"tokens", ex.tokens}, {"aspects", aspects}};
}

inline std::string serialize(const SentenceExample& ex) { return to_json(ex).dump(); }

inline void write_dataset(std::ostream& os, const std::vector<SentenceExample>& data) {
  for (const auto& ex : data) os << serialize(ex) << '\n';
}

/// Token→id map with reserved padding (0) and unknown (1) ids.
class Vocabulary {
 public:
  static constexpr std::size_t kPad = 0;
  static constexpr std::size_t kUnk = 1;

  Vocabulary() : tokens_{"<pad>", "<unk>"} {}

  static Vocabulary build(const std::vector<SentenceExample>& data) {
    Vocabulary v;
    for (const auto& ex : data)
      for (const auto& t : ex.tokens) v.add(t);
    return v;
  }

  static Vocabulary from_tokens(const std::vector<std::string>& known) {
    Vocabulary v;
    for (const auto& t : known) v.add(t);
    return v;
  }

  std::size_t add(const std::string& token) {
    if (auto it = index_.find(token); it != index_.end()) return it->second;
    tokens_.push_back(token);
    index_.emplace(token, tokens_.size() - 1);
    return tokens_.size() - 1;
  }

  std::size_t lookup(const std::string& token) const {
    auto it = index_.find(token);
    return it == index_.end() ? kUnk : it->second;
  }

  const std::string& token(std::size_t id) const { return tokens_.at(id); }
  std::size_t size() const noexcept { return tokens_.size(); }

  /// Known tokens, excluding the reserved entries, in id order.
  std::vector<std::string> known_tokens() const {
    return {tokens_.begin() + 2, tokens_.end()};
  }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Multi-hot start/end indicators for the gold aspects of one sentence.
struct BoundaryTargets {
  std::vector<double> start;
  std::vector<double> end;
};

inline BoundaryTargets make_boundary_targets(const SentenceExample& ex) {
  BoundaryTargets t{std::vector<double>(ex.size(), 0.0), std::vector<double>(ex.size(), 0.0)};
  for (const auto& a : ex.aspects) {
    t.start[a.start] = 1.0;
    t.end[a.end] = 1.0;
  }
  return t;
}

inline constexpr std::size_t kDefaultBatchSize = 32;

/// Examples padded to a common width. Row b of the flattened (B·T) layout
/// begins at b·width.
struct Batch {
  std::vector<const SentenceExample*> examples;
  std::size_t width = 0;
  std::vector<std::vector<std::size_t>> ids;    // B × width, padded with Vocabulary::kPad
  std::vector<std::vector<double>> mask;        // B × width over {0,1}
  std::vector<BoundaryTargets> targets;         // padded to width

  std::size_t size() const noexcept { return examples.size(); }
  std::size_t length(std::size_t b) const noexcept { return examples[b]->size(); }
};

inline Batch make_batch(const std::vector<const SentenceExample*>& examples, const Vocabulary& vocab) {
  Batch batch;
  batch.examples = examples;
  for (const auto* ex : examples) batch.width = std::max(batch.width, ex->size());
  for (const auto* ex : examples) {
    std::vector<std::size_t> ids(batch.width, Vocabulary::kPad);
    std::vector<double> mask(batch.width, 0.0);
    for (std::size_t t = 0; t < ex->size(); ++t) {
      ids[t] = vocab.lookup(ex->tokens[t]);
      mask[t] = 1.0;
    }
    BoundaryTargets tg = make_boundary_targets(*ex);
    tg.start.resize(batch.width, 0.0);
    tg.end.resize(batch.width, 0.0);
    batch.ids.push_back(std::move(ids));
    batch.mask.push_back(std::move(mask));
    batch.targets.push_back(std::move(tg));
  }
  return batch;
}

/// Splits examples in order into consecutive batches of at most batch_size.
inline std::vector<Batch> batch(const std::vector<SentenceExample>& examples, const Vocabulary& vocab,
                                std::size_t batch_size = kDefaultBatchSize) {
  if (batch_size == 0) throw std::invalid_argument("batch size must be at least 1");
  std::vector<Batch> out;
  for (std::size_t i = 0; i < examples.size(); i += batch_size) {
    std::vector<const SentenceExample*> chunk;
    for (std::size_t j = i; j < std::min(examples.size(), i + batch_size); ++j)
      chunk.push_back(&examples[j]);
    out.push_back(make_batch(chunk, vocab));
  }
  return out;
}

}  // namespace hiasa
