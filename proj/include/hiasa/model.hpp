#pragma once

#include <random>
#include <string>
#include <vector>

#include "hiasa/aspect_head.hpp"
#include "hiasa/config.hpp"
#include "hiasa/corpus.hpp"
#include "hiasa/encoder.hpp"
#include "hiasa/evalkit.hpp"
#include "hiasa/interaction.hpp"
#include "hiasa/ndcore/checkpoint.hpp"
#include "hiasa/ndcore/params.hpp"
#include "hiasa/objective.hpp"
#include "hiasa/sentiment_head.hpp"
#include "json.hpp"

namespace hiasa {

/// Knobs that shape one forward pass.
struct ForwardOptions {
  double alpha = 0.1;
  double dropout = 0.0;
  std::size_t hops = 2;

  static ForwardOptions from(const TrainConfig& c, bool training) {
    return {c.effective_alpha(), training ? c.dropout : 0.0, c.attention_hops};
  }
};

/// Loss components of one batch, as graph nodes.
struct LossTerms {
  nd::Var j_ae;
  nd::Var j_sc;
  nd::Var js;
  std::size_t aspect_count = 0;    // aspects feeding j_sc
  std::size_t js_sentences = 0;    // sentences feeding js
};

/// Embedding + recurrent encoder, cross-stitch interaction, boundary head
/// and attention-based polarity head.
class HiAsaModel {
 public:
  HiAsaModel(Vocabulary vocab, std::size_t embed_dim, std::size_t hidden_dim, std::uint64_t seed)
      : vocab_(std::move(vocab)) {
    std::mt19937_64 rng(seed);
    encoder_ = register_encoder(params_, vocab_.size(), embed_dim, hidden_dim, rng);
    aspect_ = register_aspect_head(params_, hidden_dim, rng);
    sentiment_ = register_sentiment_head(params_, hidden_dim, rng);
  }

  HiAsaModel(Vocabulary vocab, const TrainConfig& c)
      : HiAsaModel(std::move(vocab), c.embed_dim, c.hidden_dim, c.seed) {}

  HiAsaModel(const HiAsaModel&) = delete;
  HiAsaModel& operator=(const HiAsaModel&) = delete;

  nd::ParameterStore& params() noexcept { return params_; }
  const nd::ParameterStore& params() const noexcept { return params_; }
  const Vocabulary& vocab() const noexcept { return vocab_; }
  const EncoderParams& encoder() const noexcept { return encoder_; }
  const AspectHeadParams& aspect_head() const noexcept { return aspect_; }
  const SentimentHeadParams& sentiment_head() const noexcept { return sentiment_; }

  Batch make_batch(const std::vector<const SentenceExample*>& examples) const {
    return hiasa::make_batch(examples, vocab_);
  }

  /// Level-1 features and boundary scores for a batch.
  struct Encoded {
    SequenceLayout layout;
    TaskFeatures features;
    BoundaryScores scores;
  };

  Encoded encode_batch(nd::Graph& g, const Batch& batch, const ForwardOptions& opt) const {
    Encoded e{SequenceLayout::of(batch), {}, {}};
    nd::Var shared = encode(g, encoder_, batch, e.layout, opt.dropout);
    e.features = cross_stitch(task_encode(g, encoder_, shared, e.layout), opt.alpha);
    e.scores = boundary_scores(g, e.features.aspect, aspect_);
    return e;
  }

  /// Builds J_ae, J_sc and the JS term. Gold spans condition the attention.
  /// Sentences without aspects contribute to J_ae only.
  LossTerms loss_terms(nd::Graph& g, const Batch& batch, const ForwardOptions& opt) const {
    using namespace nd;
    Encoded enc = encode_batch(g, batch, opt);
    LossTerms out;
    out.j_ae = boundary_loss(g, enc.scores, batch, enc.layout);

    std::vector<Var> predictions;
    std::vector<Polarity> golds;
    std::vector<Var> js_terms;
    for (std::size_t b = 0; b < batch.size(); ++b) {
      const SentenceExample& ex = *batch.examples[b];
      if (ex.aspects.empty()) continue;
      Var hs = sentence_rows(enc.features.sentiment, batch, b);
      std::vector<Var> dists;
      for (const auto& a : ex.aspects) {
        AttentionResult att = aspect_attention(hs, a.start, a.end, opt.hops);
        predictions.push_back(classify(g, att.context, sentiment_));
        golds.push_back(a.polarity);
        dists.push_back(att.weights);
      }
      Var attention = sentence_attention(dists);
      AspectScoreDistribution e = aspect_score(sentence_rows(enc.scores.start, batch, b),
                                               sentence_rows(enc.scores.end, batch, b));
      js_terms.push_back(js_divergence(transpose(e.normalized), attention));
    }
    out.aspect_count = predictions.size();
    out.js_sentences = js_terms.size();
    out.j_sc = sentiment_loss(g, predictions, golds);
    out.js = js_terms.empty() ? g.constant(Tensor({1, 1})) : mean(concat(js_terms, 0));
    return out;
  }

  /// Decodes spans, labels each with a polarity, and labels every gold span
  /// for gold-conditioned accuracy.
  std::vector<SentencePrediction> predict(const Batch& batch, const ForwardOptions& opt,
                                          const DecodeOptions& decode) const {
    nd::Graph g(false);
    ForwardOptions eval_opt = opt;
    eval_opt.dropout = 0.0;
    Encoded enc = encode_batch(g, batch, eval_opt);
    std::vector<SentencePrediction> out;
    for (std::size_t b = 0; b < batch.size(); ++b) {
      const SentenceExample& ex = *batch.examples[b];
      const std::size_t n = ex.size();
      const auto off = static_cast<std::ptrdiff_t>(b * batch.width);
      const auto& gs = enc.scores.start.value().values();
      const auto& ge = enc.scores.end.value().values();
      std::vector<double> start(gs.begin() + off, gs.begin() + off + static_cast<std::ptrdiff_t>(n));
      std::vector<double> end(ge.begin() + off, ge.begin() + off + static_cast<std::ptrdiff_t>(n));

      SentencePrediction p;
      p.id = ex.id;
      p.spans = decode_spans(start, end, decode);
      nd::Var hs = sentence_rows(enc.features.sentiment, batch, b);
      auto polarity_of = [&](std::size_t s, std::size_t e) {
        AttentionResult att = aspect_attention(hs, s, e, eval_opt.hops);
        return argmax_polarity(classify(g, att.context, sentiment_).value());
      };
      for (auto& span : p.spans) span.polarity = polarity_of(span.start, span.end);
      for (const auto& a : ex.aspects) p.gold_span_polarities.emplace_back(polarity_of(a.start, a.end));
      out.push_back(std::move(p));
    }
    return out;
  }

  std::vector<SentencePrediction> predict(const std::vector<SentenceExample>& data,
                                          const ForwardOptions& opt, const DecodeOptions& decode,
                                          std::size_t batch_size = kDefaultBatchSize) const {
    std::vector<SentencePrediction> out;
    for (const Batch& b : batch(data, vocab_, batch_size)) {
      auto part = predict(b, opt, decode);
      out.insert(out.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
    }
    return out;
  }

 private:
  Vocabulary vocab_;
  nd::ParameterStore params_;
  EncoderParams encoder_;
  AspectHeadParams aspect_;
  SentimentHeadParams sentiment_;
};

inline DecodeOptions decode_options(const TrainConfig& c) {
  return {c.tau_start, c.tau_end, c.max_span_len};
}

/// Writes parameters with the configuration text and vocabulary in the metadata.
inline void save_model(const std::string& path, const HiAsaModel& model, const TrainConfig& cfg,
                       std::uint64_t step) {
  nd::CheckpointMeta meta;
  meta.config_hash = config_hash(cfg);
  meta.step = step;
  meta.fields["config"] = to_text(cfg, false);
  meta.fields["vocab"] = nlohmann::json(model.vocab().known_tokens()).dump();
  nd::save_checkpoint(path, meta, model.params());
}

struct LoadedModel {
  TrainConfig config;
  std::unique_ptr<HiAsaModel> model;
  std::uint64_t step = 0;
};

inline LoadedModel load_model(const std::string& path) {
  nd::Checkpoint ck = nd::load_checkpoint(path);
  LoadedModel out;
  auto cfg = ck.meta.fields.find("config");
  auto voc = ck.meta.fields.find("vocab");
  if (cfg == ck.meta.fields.end() || voc == ck.meta.fields.end())
    throw nd::CheckpointError("checkpoint metadata lacks config or vocabulary");
  apply_config_text(out.config, cfg->second);
  if (config_hash(out.config) != ck.meta.config_hash)
    throw nd::CheckpointError("checkpoint config hash mismatch");
  auto tokens = nlohmann::json::parse(voc->second).get<std::vector<std::string>>();
  out.model = std::make_unique<HiAsaModel>(Vocabulary::from_tokens(tokens), out.config);
  nd::restore_parameters(ck, out.model->params());
  out.step = ck.meta.step;
  return out;
}

}  // namespace hiasa
