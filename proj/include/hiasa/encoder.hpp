#pragma once

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "hiasa/corpus.hpp"
#include "hiasa/ndcore/graph.hpp"
#include "hiasa/ndcore/ops.hpp"
#include "hiasa/ndcore/params.hpp"

namespace hiasa {

/// Gated recurrent unit weights; gates are packed as [reset | update | candidate].
struct GruParams {
  nd::Tensor* w = nullptr;   // in × 3h
  nd::Tensor* u = nullptr;   // h × 3h
  nd::Tensor* bx = nullptr;  // 1 × 3h
  nd::Tensor* bh = nullptr;  // 1 × 3h
  std::size_t input = 0;
  std::size_t hidden = 0;

  std::vector<nd::Tensor*> tensors() const { return {w, u, bx, bh}; }
};

inline nd::Tensor random_normal(nd::Shape s, double sigma, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, sigma);
  nd::Tensor t(s);
  for (double& v : t.values()) v = dist(rng);
  return t;
}

inline nd::Tensor random_uniform(nd::Shape s, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  nd::Tensor t(s);
  for (double& v : t.values()) v = dist(rng);
  return t;
}

inline GruParams register_gru(nd::ParameterStore& store, const std::string& prefix, std::size_t input,
                              std::size_t hidden, std::mt19937_64& rng) {
  GruParams p;
  p.input = input;
  p.hidden = hidden;
  p.w = &store.add(prefix + ".w", random_normal({input, 3 * hidden}, 1.0 / std::sqrt(double(input)), rng));
  p.u = &store.add(prefix + ".u", random_normal({hidden, 3 * hidden}, 1.0 / std::sqrt(double(hidden)), rng));
  p.bx = &store.add(prefix + ".bx", nd::Tensor({1, 3 * hidden}));
  p.bh = &store.add(prefix + ".bh", nd::Tensor({1, 3 * hidden}));
  return p;
}

/// Row layout shared by every per-token matrix of a batch: row b·width + t.
struct SequenceLayout {
  std::size_t batch = 0;
  std::size_t width = 0;
  std::vector<double> mask;  // batch·width

  static SequenceLayout of(const Batch& b) {
    SequenceLayout l{b.size(), b.width, {}};
    for (const auto& row : b.mask) l.mask.insert(l.mask.end(), row.begin(), row.end());
    return l;
  }
  std::size_t rows() const noexcept { return batch * width; }
  nd::Tensor mask_column() const { return nd::Tensor({rows(), 1}, mask); }
  nd::Tensor step_mask(std::size_t t) const {
    nd::Tensor m({batch, 1});
    for (std::size_t b = 0; b < batch; ++b) m[b] = mask[b * width + t];
    return m;
  }
};

/// Runs a GRU over every sequence of the batch. Padded steps carry the
/// previous state through unchanged and their outputs are zeroed, so each
/// sequence sees exactly its own tokens in either direction.
inline nd::Var run_gru(nd::Graph& g, const GruParams& p, nd::Var x, const SequenceLayout& layout,
                       bool reverse) {
  using namespace nd;
  const std::size_t B = layout.batch, T = layout.width, H = p.hidden;
  if (x.shape() != Shape{layout.rows(), p.input})
    throw ShapeError("run_gru: input " + to_string(x.shape()) + " does not match layout " +
                     to_string(Shape{layout.rows(), p.input}));
  Var xw = add(matmul(x, g.param(*p.w)), g.param(*p.bx));
  Var u = g.param(*p.u);
  Var bh = g.param(*p.bh);
  Var h = g.constant(Tensor({B, H}));
  std::vector<Var> outputs(T);
  for (std::size_t k = 0; k < T; ++k) {
    const std::size_t t = reverse ? T - 1 - k : k;
    std::vector<std::size_t> rows(B);
    for (std::size_t b = 0; b < B; ++b) rows[b] = b * T + t;
    Var xt = gather_rows(xw, rows);
    Var hu = add(matmul(h, u), bh);
    Var r = sigmoid(add(slice(xt, 1, 0, H), slice(hu, 1, 0, H)));
    Var z = sigmoid(add(slice(xt, 1, H, 2 * H), slice(hu, 1, H, 2 * H)));
    Var n = tanh(add(slice(xt, 1, 2 * H, 3 * H), mul(r, slice(hu, 1, 2 * H, 3 * H))));
    Var cand = add(n, mul(z, sub(h, n)));
    h = add(h, mul(sub(cand, h), g.constant(layout.step_mask(t))));
    outputs[t] = h;
  }
  // outputs are time-major; reorder to the batch-major row layout.
  Var stacked = concat(outputs, 0);
  std::vector<std::size_t> perm(B * T);
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t t = 0; t < T; ++t) perm[b * T + t] = t * B + b;
  return mul(gather_rows(stacked, perm), g.constant(layout.mask_column()));
}

struct EncoderParams {
  nd::Tensor* embedding = nullptr;  // V × d
  GruParams shared_fwd;             // d → d/2
  GruParams shared_bwd;             // d → d/2
  GruParams aspect;                 // d → d-hat
  GruParams sentiment;              // d → d-hat
  std::size_t embed_dim = 0;
  std::size_t hidden_dim = 0;
};

inline EncoderParams register_encoder(nd::ParameterStore& store, std::size_t vocab_size,
                                      std::size_t embed_dim, std::size_t hidden_dim,
                                      std::mt19937_64& rng) {
  if (embed_dim < 2 || embed_dim % 2 != 0)
    throw std::invalid_argument("embed_dim must be even and at least 2");
  EncoderParams p;
  p.embed_dim = embed_dim;
  p.hidden_dim = hidden_dim;
  p.embedding = &store.add("embedding", random_uniform({vocab_size, embed_dim}, 0.1, rng));
  p.shared_fwd = register_gru(store, "shared.fwd", embed_dim, embed_dim / 2, rng);
  p.shared_bwd = register_gru(store, "shared.bwd", embed_dim, embed_dim / 2, rng);
  p.aspect = register_gru(store, "aspect_gru", embed_dim, hidden_dim, rng);
  p.sentiment = register_gru(store, "sentiment_gru", embed_dim, hidden_dim, rng);
  return p;
}

/// Task features; level 0 before the interaction layer, 1 after.
struct TaskFeatures {
  nd::Var aspect;
  nd::Var sentiment;
  int level = 0;
};

/// Shared contextual features B, (batch·width) × d, zero on padded rows.
inline nd::Var encode(nd::Graph& g, const EncoderParams& p, const Batch& batch,
                      const SequenceLayout& layout, double dropout_rate = 0.0) {
  using namespace nd;
  std::vector<std::size_t> flat;
  flat.reserve(layout.rows());
  for (const auto& row : batch.ids)
    for (std::size_t id : row) {
      if (id >= p.embedding->rows())
        throw std::out_of_range("token id " + std::to_string(id) + " outside vocabulary of size " +
                                std::to_string(p.embedding->rows()));
      flat.push_back(id);
    }
  Var x = mul(gather_rows(g.param(*p.embedding), std::move(flat)), g.constant(layout.mask_column()));
  Var fwd = run_gru(g, p.shared_fwd, x, layout, false);
  Var bwd = run_gru(g, p.shared_bwd, x, layout, true);
  return dropout(concat({fwd, bwd}, 1), dropout_rate);
}

/// Level-0 aspect and sentiment features from separate recurrent stacks.
inline TaskFeatures task_encode(nd::Graph& g, const EncoderParams& p, nd::Var shared,
                                const SequenceLayout& layout) {
  return {run_gru(g, p.aspect, shared, layout, false), run_gru(g, p.sentiment, shared, layout, false), 0};
}

}  // namespace hiasa
