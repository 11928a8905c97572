#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <random>
#include <span>
#include <tuple>
#include <vector>

#include "hiasa/corpus.hpp"
#include "hiasa/encoder.hpp"
#include "hiasa/ndcore/ops.hpp"

namespace hiasa {

struct AspectHeadParams {
  nd::Tensor* v_start = nullptr;  // d-hat × 1
  nd::Tensor* v_end = nullptr;    // d-hat × 1
};

inline AspectHeadParams register_aspect_head(nd::ParameterStore& store, std::size_t hidden,
                                             std::mt19937_64& rng) {
  const double sigma = 1.0 / std::sqrt(static_cast<double>(hidden));
  return {&store.add("aspect.v_start", random_normal({hidden, 1}, sigma, rng)),
          &store.add("aspect.v_end", random_normal({hidden, 1}, sigma, rng))};
}

/// Per-token start/end probabilities as column vectors over the rows of H_a.
struct BoundaryScores {
  nd::Var start;
  nd::Var end;
};

inline BoundaryScores boundary_scores(nd::Graph& g, nd::Var aspect_features, const AspectHeadParams& p) {
  return {nd::sigmoid(nd::matmul(aspect_features, g.param(*p.v_start))),
          nd::sigmoid(nd::matmul(aspect_features, g.param(*p.v_end)))};
}

/// Binary cross-entropy over both boundary channels, summed over unmasked
/// tokens and averaged over the sentences of the batch.
inline nd::Var boundary_loss(nd::Graph& g, const BoundaryScores& s, const Batch& batch,
                             const SequenceLayout& layout) {
  using namespace nd;
  const std::size_t rows = layout.rows();
  Tensor ps({rows, 1}), pe({rows, 1});
  for (std::size_t b = 0; b < batch.size(); ++b)
    for (std::size_t t = 0; t < layout.width; ++t) {
      ps[b * layout.width + t] = batch.targets[b].start[t];
      pe[b * layout.width + t] = batch.targets[b].end[t];
    }
  Var mask = g.constant(layout.mask_column());
  auto bce = [&](Var score, const Tensor& target) {
    Tensor inv(target.shape());
    for (std::size_t i = 0; i < target.size(); ++i) inv[i] = 1.0 - target[i];
    Var pos = mul(safe_log(score), g.constant(target));
    Var neg = mul(safe_log(affine(score, -1.0, 1.0)), g.constant(std::move(inv)));
    return sum(mul(add(pos, neg), mask));
  };
  Var total = add(bce(s.start, ps), bce(s.end, pe));
  return scale(total, -1.0 / static_cast<double>(batch.size()));
}

/// Width-3 zero-padded mean pooling with a fixed divisor of 3.
inline std::vector<double> pool3(std::span<const double> v) {
  const std::size_t n = v.size();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = v[i];
    if (i > 0) s += v[i - 1];
    if (i + 1 < n) s += v[i + 1];
    out[i] = s / 3.0;
  }
  return out;
}

struct AspectScoreDistribution {
  nd::Var raw;         // n × 1
  nd::Var normalized;  // n × 1, on the simplex
};

/// Rows [b·width, b·width + length_b) of a per-token matrix.
inline nd::Var sentence_rows(nd::Var per_token, const Batch& batch, std::size_t b) {
  const std::size_t begin = b * batch.width;
  return nd::slice(per_token, 0, begin, begin + batch.length(b));
}

/// Aspect-likeness over the real tokens of one sentence: the mean of the
/// pooled start and end scores, then sum-normalized.
inline AspectScoreDistribution aspect_score(nd::Var start, nd::Var end) {
  using namespace nd;
  Var raw = scale(add(pool3(start), pool3(end)), 0.5);
  Var total = sum(raw);
  if (!(total.item() > 0.0)) throw NumericError("aspect_score: pooled scores sum to zero");
  return {raw, div(raw, total)};
}

struct SpanPrediction {
  std::size_t start = 0;
  std::size_t end = 0;
  double score = 0.0;
  std::optional<Polarity> polarity;
};

struct DecodeOptions {
  double tau_start = 0.5;
  double tau_end = 0.5;
  std::size_t max_span_len = 8;
};

inline bool spans_overlap(std::size_t a0, std::size_t a1, std::size_t b0, std::size_t b1) {
  return a0 <= b1 && b0 <= a1;
}

/// Threshold the boundary scores, pair starts with ends no further than
/// max_span_len - 1 tokens away, score pairs by start·end probability and
/// accept greedily (ties: smaller start, then shorter span), skipping
/// anything that overlaps an accepted span. Output is ordered by start.
inline std::vector<SpanPrediction> decode_spans(std::span<const double> start, std::span<const double> end,
                                                const DecodeOptions& opt,
                                                std::span<const double> mask = {}) {
  if (start.size() != end.size()) throw nd::ShapeError("decode_spans: score vectors differ in length");
  if (!mask.empty() && mask.size() != start.size())
    throw nd::ShapeError("decode_spans: mask length differs from score length");
  if (!(opt.tau_start > 0.0 && opt.tau_start < 1.0) || !(opt.tau_end > 0.0 && opt.tau_end < 1.0))
    throw std::invalid_argument("decode_spans: thresholds must lie in (0, 1)");
  if (opt.max_span_len < 1) throw std::invalid_argument("decode_spans: max_span_len must be >= 1");
  const std::size_t n = start.size();
  auto live = [&](std::size_t i) { return mask.empty() || mask[i] != 0.0; };

  std::vector<SpanPrediction> cands;
  for (std::size_t i = 0; i < n; ++i) {
    if (!live(i) || start[i] < opt.tau_start) continue;
    for (std::size_t j = i; j < n && j < i + opt.max_span_len; ++j) {
      if (!live(j) || end[j] < opt.tau_end) continue;
      cands.push_back({i, j, start[i] * end[j], std::nullopt});
    }
  }
  std::sort(cands.begin(), cands.end(), [](const SpanPrediction& a, const SpanPrediction& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.start != b.start) return a.start < b.start;
    return a.end < b.end;
  });
  std::vector<SpanPrediction> accepted;
  for (const auto& c : cands) {
    const bool clash = std::any_of(accepted.begin(), accepted.end(), [&](const SpanPrediction& a) {
      return spans_overlap(a.start, a.end, c.start, c.end);
    });
    if (!clash) accepted.push_back(c);
  }
  std::sort(accepted.begin(), accepted.end(),
            [](const SpanPrediction& a, const SpanPrediction& b) { return a.start < b.start; });
  return accepted;
}

}  // namespace hiasa
