#include <gtest/gtest.h>

#include <cstring>

#include "hiasa/encoder.hpp"

using namespace hiasa;
using namespace hiasa::nd;

namespace {

SentenceExample sentence(std::vector<std::string> toks) {
  SentenceExample ex;
  ex.id = "s";
  ex.tokens = std::move(toks);
  return ex;
}

struct Fixture {
  std::vector<SentenceExample> data;
  Vocabulary vocab;
  ParameterStore store;
  EncoderParams enc;

  explicit Fixture(std::size_t d = 6, std::size_t dh = 4) {
    data = {sentence({"the", "screen", "is", "great", "."}), sentence({"awful", "service"}),
            sentence({"the", "screen", "is", "great", "."})};
    vocab = Vocabulary::build(data);
    std::mt19937_64 rng(17);
    enc = register_encoder(store, vocab.size(), d, dh, rng);
  }

  Batch make(std::vector<std::size_t> which) const {
    std::vector<const SentenceExample*> ptrs;
    for (std::size_t i : which) ptrs.push_back(&data[i]);
    return make_batch(ptrs, vocab);
  }
};

std::vector<double> copy(const Tensor& t) { return {t.values().begin(), t.values().end()}; }

}  // namespace

TEST(Encoder, ParameterShapes) {
  Fixture f(8, 5);
  EXPECT_EQ(f.store.at("embedding").shape(), (Shape{f.vocab.size(), 8}));
  EXPECT_EQ(f.store.at("shared.fwd.w").shape(), (Shape{8, 12}));
  EXPECT_EQ(f.store.at("shared.bwd.u").shape(), (Shape{4, 12}));
  EXPECT_EQ(f.store.at("aspect_gru.w").shape(), (Shape{8, 15}));
  EXPECT_EQ(f.store.at("sentiment_gru.bh").shape(), (Shape{1, 15}));
  for (double v : f.store.at("embedding").values()) EXPECT_LE(std::abs(v), 0.1);
  EXPECT_THROW(Fixture(7, 4), std::invalid_argument);
}

TEST(Encoder, SingleTokenSentenceShape) {
  Fixture f;
  f.data.push_back(sentence({"pizza"}));
  Batch b = f.make({3});
  Graph g;
  const auto layout = SequenceLayout::of(b);
  Var B = encode(g, f.enc, b, layout);
  EXPECT_EQ(B.shape(), (Shape{1, 6}));
}

TEST(Encoder, TaskFeatureShapes) {
  Fixture f(6, 4);
  Batch b = f.make({0});
  Graph g;
  const auto layout = SequenceLayout::of(b);
  TaskFeatures tf = task_encode(g, f.enc, encode(g, f.enc, b, layout), layout);
  EXPECT_EQ(tf.level, 0);
  EXPECT_EQ(tf.aspect.shape(), (Shape{5, 4}));
  EXPECT_EQ(tf.sentiment.shape(), (Shape{5, 4}));
}

TEST(Encoder, PaddedRowsAreZero) {
  Fixture f;
  Batch b = f.make({0, 1});
  Graph g;
  const auto layout = SequenceLayout::of(b);
  Var B = encode(g, f.enc, b, layout);
  TaskFeatures tf = task_encode(g, f.enc, B, layout);
  for (Var v : {B, tf.aspect, tf.sentiment})
    for (std::size_t t = 2; t < 5; ++t)
      for (std::size_t c = 0; c < v.shape().cols; ++c) EXPECT_EQ(v.value()(5 + t, c), 0.0);
}

TEST(Encoder, PaddingDoesNotChangeRealRows) {
  // A sentence encoded alone and inside a wider batch yields identical features.
  Fixture f;
  Graph g1, g2;
  Batch alone = f.make({1});
  Batch padded = f.make({0, 1});
  const auto la = SequenceLayout::of(alone), lp = SequenceLayout::of(padded);
  Var a = task_encode(g1, f.enc, encode(g1, f.enc, alone, la), la).sentiment;
  Var p = task_encode(g2, f.enc, encode(g2, f.enc, padded, lp), lp).sentiment;
  for (std::size_t t = 0; t < 2; ++t)
    for (std::size_t c = 0; c < 4; ++c) EXPECT_NEAR(a.value()(t, c), p.value()(5 + t, c), 1e-14);
}

TEST(Encoder, IdenticalSentencesGiveIdenticalFeatures) {
  Fixture f;
  Batch b = f.make({0, 2});
  Graph g;
  const auto layout = SequenceLayout::of(b);
  Var B = encode(g, f.enc, b, layout);
  for (std::size_t t = 0; t < 5; ++t)
    for (std::size_t c = 0; c < 6; ++c) EXPECT_EQ(B.value()(t, c), B.value()(5 + t, c));
}

TEST(Encoder, OutOfRangeIdRejected) {
  Fixture f;
  Batch b = f.make({0});
  b.ids[0][1] = f.vocab.size() + 3;
  Graph g;
  EXPECT_THROW(encode(g, f.enc, b, SequenceLayout::of(b)), std::out_of_range);
}

TEST(Encoder, ZeroedSentimentStackLeavesAspectUnchanged) {
  Fixture f;
  Batch b = f.make({0, 1});
  const auto layout = SequenceLayout::of(b);
  auto run = [&] {
    Graph g;
    TaskFeatures tf = task_encode(g, f.enc, encode(g, f.enc, b, layout), layout);
    return std::pair{copy(tf.aspect.value()), copy(tf.sentiment.value())};
  };
  const auto before = run();
  for (Tensor* t : f.enc.sentiment.tensors())
    for (double& v : t->values()) v = 0.0;
  const auto after = run();
  EXPECT_EQ(std::memcmp(before.first.data(), after.first.data(), before.first.size() * sizeof(double)), 0);
  // All-zero GRU: gates are sigmoid(0), candidate tanh(0) = 0, so h_t = 0.5 h_{t-1} = 0.
  for (double v : after.second) EXPECT_EQ(v, 0.0);
}

TEST(Encoder, TaskStacksReceiveNoCrossGradient) {
  Fixture f;
  Batch b = f.make({0, 1});
  const auto layout = SequenceLayout::of(b);
  std::mt19937_64 rng(4);
  auto readout = [&](bool aspect_side) {
    f.store.zero_grad();
    Graph g;
    TaskFeatures tf = task_encode(g, f.enc, encode(g, f.enc, b, layout), layout);
    Var h = aspect_side ? tf.aspect : tf.sentiment;
    Tensor w(h.shape());
    for (double& v : w.values()) v = std::uniform_real_distribution<double>(-1, 1)(rng);
    g.backward(sum(mul(h, g.constant(w))));
  };
  auto norm = [](const GruParams& p) {
    double s = 0;
    for (Tensor* t : p.tensors())
      for (double v : t->grad()) s += std::abs(v);
    return s;
  };
  readout(true);
  EXPECT_EQ(norm(f.enc.sentiment), 0.0);
  EXPECT_GT(norm(f.enc.aspect), 0.0);
  readout(false);
  EXPECT_EQ(norm(f.enc.aspect), 0.0);
  EXPECT_GT(norm(f.enc.sentiment), 0.0);
}

TEST(Encoder, PaddedPositionsReceiveZeroGradient) {
  Fixture f;
  Batch b = f.make({0, 1});
  const auto layout = SequenceLayout::of(b);
  // Route the padded token through a dedicated embedding row so its gradient is observable.
  Graph g;
  Tensor& emb = f.store.at("embedding");
  f.store.zero_grad();
  TaskFeatures tf = task_encode(g, f.enc, encode(g, f.enc, b, layout), layout);
  g.backward(add(sum(tf.aspect), sum(tf.sentiment)));
  for (std::size_t c = 0; c < emb.cols(); ++c) EXPECT_EQ(emb.grad()[Vocabulary::kPad * emb.cols() + c], 0.0);
  EXPECT_NE(emb.grad()[f.vocab.lookup("awful") * emb.cols()], 0.0);
}

TEST(Encoder, ForwardIsDeterministic) {
  Fixture f;
  Batch b = f.make({0, 1});
  const auto layout = SequenceLayout::of(b);
  auto run = [&] {
    Graph g(true, 123);
    return copy(encode(g, f.enc, b, layout, 0.1).value());
  };
  const auto a = run(), c = run();
  EXPECT_EQ(std::memcmp(a.data(), c.data(), a.size() * sizeof(double)), 0);
}
