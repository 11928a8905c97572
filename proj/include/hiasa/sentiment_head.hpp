#pragma once

#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

#include "hiasa/corpus.hpp"
#include "hiasa/encoder.hpp"
#include "hiasa/ndcore/ops.hpp"

namespace hiasa {

struct SentimentHeadParams {
  nd::Tensor* weight = nullptr;  // d-hat × 3
  nd::Tensor* bias = nullptr;    // 1 × 3
};

inline SentimentHeadParams register_sentiment_head(nd::ParameterStore& store, std::size_t hidden,
                                                   std::mt19937_64& rng) {
  const double sigma = 1.0 / std::sqrt(static_cast<double>(hidden));
  return {&store.add("sentiment.w", random_normal({hidden, kNumPolarities}, sigma, rng)),
          &store.add("sentiment.b", nd::Tensor({1, kNumPolarities}))};
}

struct AttentionResult {
  nd::Var weights;  // 1 × n, on the simplex
  nd::Var context;  // 1 × d-hat
};

/// Multi-hop aspect-conditioned attention over one sentence's sentiment
/// features (n × d-hat). The query starts as the mean of the span's rows and
/// absorbs each hop's context vector:
///
///   A_k = softmax(q_{k-1} · H^T / sqrt(d-hat)),  c_k = A_k · H,  q_k = q_{k-1} + c_k
inline AttentionResult aspect_attention(nd::Var sentence_features, std::size_t span_start,
                                        std::size_t span_end, std::size_t hops) {
  using namespace nd;
  const Shape s = sentence_features.shape();
  if (span_end < span_start || span_end >= s.rows)
    throw std::out_of_range("aspect_attention: span (" + std::to_string(span_start) + "," +
                            std::to_string(span_end) + ") invalid for " + std::to_string(s.rows) +
                            " tokens");
  if (hops < 1) throw std::invalid_argument("aspect_attention: hops must be >= 1");
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(s.cols));
  Var keys = transpose(sentence_features);
  Var query = mean(slice(sentence_features, 0, span_start, span_end + 1), 0);
  AttentionResult r;
  for (std::size_t k = 0; k < hops; ++k) {
    r.weights = softmax(scale(matmul(query, keys), inv_sqrt_d), 1);
    r.context = matmul(r.weights, sentence_features);
    query = add(query, r.context);
  }
  return r;
}

/// Polarity distribution (1 × 3) over {positive, negative, neutral}.
inline nd::Var classify(nd::Graph& g, nd::Var context, const SentimentHeadParams& p) {
  return nd::softmax(nd::add(nd::matmul(context, g.param(*p.weight)), g.param(*p.bias)), 1);
}

inline Polarity argmax_polarity(const nd::Tensor& dist) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < kNumPolarities; ++k)
    if (dist[k] > dist[best]) best = k;
  return static_cast<Polarity>(best);
}

/// Mean cross-entropy of the predicted distributions against gold labels.
inline nd::Var sentiment_loss(nd::Graph& g, const std::vector<nd::Var>& predictions,
                              const std::vector<Polarity>& golds) {
  using namespace nd;
  if (predictions.size() != golds.size())
    throw std::invalid_argument("sentiment_loss: one prediction per gold aspect required");
  if (predictions.empty()) return g.constant(Tensor({1, 1}));
  std::vector<Var> picked;
  picked.reserve(predictions.size());
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const auto k = static_cast<std::size_t>(golds[i]);
    picked.push_back(slice(predictions[i], 1, k, k + 1));
  }
  return scale(sum(safe_log(concat(picked, 0))), -1.0 / static_cast<double>(picked.size()));
}

/// Elementwise mean of the per-aspect attention distributions of one sentence.
inline nd::Var sentence_attention(const std::vector<nd::Var>& distributions) {
  if (distributions.empty())
    throw std::invalid_argument("sentence_attention: no aspect distributions to aggregate");
  return nd::mean(nd::concat(distributions, 0), 0);
}

}  // namespace hiasa
