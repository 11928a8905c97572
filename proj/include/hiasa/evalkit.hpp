#pragma once

#include <cstdio>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "hiasa/aspect_head.hpp"
#include "hiasa/corpus.hpp"
#include "json.hpp"

namespace hiasa {

/// Model output for one sentence: decoded spans (with polarities) and the
/// polarity predicted for each gold span, aligned with the gold aspects.
struct SentencePrediction {
  std::string id;
  std::vector<SpanPrediction> spans;
  std::vector<std::optional<Polarity>> gold_span_polarities;
};

struct PrfCounts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct MetricReport {
  PrfCounts joint;
  PrfCounts ae;
  double sc_accuracy = 0.0;
  std::size_t sc_correct = 0;
  std::size_t sc_total = 0;
};

inline PrfCounts finish_prf(std::size_t tp, std::size_t fp, std::size_t fn) {
  PrfCounts c{tp, fp, fn, 0.0, 0.0, 0.0};
  if (tp + fp > 0) c.precision = double(tp) / double(tp + fp);
  if (tp + fn > 0) c.recall = double(tp) / double(tp + fn);
  if (c.precision + c.recall > 0.0) c.f1 = 2.0 * c.precision * c.recall / (c.precision + c.recall);
  return c;
}

namespace detail {

inline std::unordered_map<std::string, const SentenceExample*> index_golds(
    const std::vector<SentenceExample>& golds) {
  std::unordered_map<std::string, const SentenceExample*> by_id;
  for (const auto& g : golds)
    if (!by_id.emplace(g.id, &g).second)
      throw std::invalid_argument("duplicate gold sentence id '" + g.id + "'");
  return by_id;
}

inline std::unordered_map<std::string, const SentencePrediction*> index_predictions(
    const std::vector<SentencePrediction>& preds,
    const std::unordered_map<std::string, const SentenceExample*>& golds) {
  std::unordered_map<std::string, const SentencePrediction*> by_id;
  for (const auto& p : preds) {
    if (!golds.contains(p.id)) throw std::invalid_argument("prediction for unknown sentence id '" + p.id + "'");
    if (!by_id.emplace(p.id, &p).second)
      throw std::invalid_argument("duplicate prediction for sentence id '" + p.id + "'");
  }
  return by_id;
}

// Micro-averaged exact-match counting; with_polarity selects joint vs AE.
inline PrfCounts span_prf(const std::vector<SentencePrediction>& preds,
                          const std::vector<SentenceExample>& golds, bool with_polarity) {
  const auto gold_idx = index_golds(golds);
  const auto pred_idx = index_predictions(preds, gold_idx);
  std::size_t tp = 0, n_pred = 0, n_gold = 0;
  for (const auto& g : golds) {
    n_gold += g.aspects.size();
    auto it = pred_idx.find(g.id);
    if (it == pred_idx.end()) continue;
    std::vector<bool> used(g.aspects.size(), false);
    for (const auto& s : it->second->spans) {
      ++n_pred;
      for (std::size_t k = 0; k < g.aspects.size(); ++k) {
        const auto& a = g.aspects[k];
        if (used[k] || a.start != s.start || a.end != s.end) continue;
        if (with_polarity && (!s.polarity || *s.polarity != a.polarity)) continue;
        used[k] = true;
        ++tp;
        break;
      }
    }
  }
  return finish_prf(tp, n_pred - tp, n_gold - tp);
}

}  // namespace detail

/// A prediction counts only if start, end and polarity all match a gold aspect.
inline PrfCounts joint_f1(const std::vector<SentencePrediction>& preds,
                          const std::vector<SentenceExample>& golds) {
  return detail::span_prf(preds, golds, true);
}

/// Boundary-only exact match.
inline PrfCounts ae_f1(const std::vector<SentencePrediction>& preds,
                       const std::vector<SentenceExample>& golds) {
  return detail::span_prf(preds, golds, false);
}

struct ScCounts {
  std::size_t correct = 0;
  std::size_t total = 0;
  double accuracy() const { return total == 0 ? 0.0 : double(correct) / double(total); }
};

/// Polarity accuracy over gold spans; gold aspects without a prediction are wrong.
inline ScCounts sc_counts(const std::vector<SentencePrediction>& preds,
                          const std::vector<SentenceExample>& golds) {
  const auto gold_idx = detail::index_golds(golds);
  const auto pred_idx = detail::index_predictions(preds, gold_idx);
  ScCounts c;
  for (const auto& g : golds) {
    c.total += g.aspects.size();
    auto it = pred_idx.find(g.id);
    if (it == pred_idx.end()) continue;
    const auto& pol = it->second->gold_span_polarities;
    for (std::size_t k = 0; k < g.aspects.size() && k < pol.size(); ++k)
      if (pol[k] && *pol[k] == g.aspects[k].polarity) ++c.correct;
  }
  return c;
}

inline double sc_accuracy(const std::vector<SentencePrediction>& preds,
                          const std::vector<SentenceExample>& golds) {
  return sc_counts(preds, golds).accuracy();
}

inline MetricReport evaluate(const std::vector<SentencePrediction>& preds,
                             const std::vector<SentenceExample>& golds) {
  MetricReport r;
  r.joint = joint_f1(preds, golds);
  r.ae = ae_f1(preds, golds);
  const ScCounts sc = sc_counts(preds, golds);
  r.sc_correct = sc.correct;
  r.sc_total = sc.total;
  r.sc_accuracy = sc.accuracy();
  return r;
}

inline nlohmann::json to_json(const MetricReport& r) {
  auto prf = [](const PrfCounts& c) {
    return nlohmann::json{{"p", c.precision}, {"r", c.recall}, {"f1", c.f1},
                          {"tp", c.tp}, {"fp", c.fp}, {"fn", c.fn}};
  };
  return {{"joint", prf(r.joint)}, {"ae", prf(r.ae)}, {"sc_acc", r.sc_accuracy},
          {"sc_correct", r.sc_correct}, {"sc_total", r.sc_total}};
}

inline std::string format_table(const MetricReport& r) {
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "task    precision  recall     f1        tp    fp    fn\n"
                "joint   %-10.4f %-10.4f %-9.4f %-5zu %-5zu %zu\n"
                "ae      %-10.4f %-10.4f %-9.4f %-5zu %-5zu %zu\n"
                "sc_acc  %.4f (%zu/%zu)\n",
                r.joint.precision, r.joint.recall, r.joint.f1, r.joint.tp, r.joint.fp, r.joint.fn,
                r.ae.precision, r.ae.recall, r.ae.f1, r.ae.tp, r.ae.fp, r.ae.fn, r.sc_accuracy,
                r.sc_correct, r.sc_total);
  return buf;
}

/// Decode output record: {"id", "spans":[{"start","end","score","polarity"}]}.
inline nlohmann::json to_json(const SentencePrediction& p) {
  nlohmann::json spans = nlohmann::json::array();
  for (const auto& s : p.spans) {
    nlohmann::json js{{"start", s.start}, {"end", s.end}, {"score", s.score}};
    js["polarity"] = s.polarity ? nlohmann::json(std::string(to_string(*s.polarity))) : nlohmann::json();
    spans.push_back(std::move(js));
  }
  return {{"id", p.id}, {"spans", spans}};
}

}  // namespace hiasa
