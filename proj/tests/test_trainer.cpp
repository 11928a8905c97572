#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <numeric>
#include <set>

#include "hiasa/hiasa.hpp"

using namespace hiasa;

namespace {

std::vector<SentenceExample> toy_corpus() { return parse_dataset(std::string(HIASA_DATA_DIR) + "/toy.jsonl"); }

std::vector<SentenceExample> overfit_corpus() {
  SyntheticOptions opt;
  opt.sentences = 8;
  opt.seed = 3;
  opt.distractor_prob = 0.0;
  opt.max_aspects = 1;
  opt.id_prefix = "ov";
  return generate_synthetic(opt);
}

TrainConfig small_config() {
  TrainConfig c;
  c.embed_dim = 8;
  c.hidden_dim = 6;
  c.epochs = 3;
  c.batch_size = 4;
  c.patience = 0;
  return c;
}

std::vector<nlohmann::json> run_log(const TrainConfig& cfg, const std::vector<SentenceExample>& data) {
  HiAsaModel model(Vocabulary::build(data), cfg);
  std::vector<nlohmann::json> log;
  train(model, cfg, data, {}, [&](const EpochRecord& r) { log.push_back(to_json(r)); });
  return log;
}

std::vector<double> values_of(const nd::ParameterStore& s) {
  std::vector<double> out;
  for (const auto& e : s) out.insert(out.end(), e.tensor.values().begin(), e.tensor.values().end());
  return out;
}

}  // namespace

TEST(Train, NoShallowMatchesAlphaZeroBitwise) {
  const auto data = toy_corpus();
  TrainConfig a = small_config();
  a.alpha = 0.3;
  a.no_shallow = true;
  TrainConfig b = small_config();
  b.alpha = 0.0;
  const auto la = run_log(a, data), lb = run_log(b, data);
  ASSERT_EQ(la.size(), lb.size());
  for (std::size_t i = 0; i < la.size(); ++i)
    for (const char* k : {"j_ae", "j_sc", "js", "total"}) {
      const double x = la[i][k], y = lb[i][k];
      EXPECT_EQ(std::memcmp(&x, &y, sizeof x), 0) << k << " epoch " << i + 1;
    }
}

TEST(Train, NoDeepLogsJsButExcludesIt) {
  const auto data = toy_corpus();
  TrainConfig c = small_config();
  c.no_deep = true;
  c.beta = 0.7;
  HiAsaModel model(Vocabulary::build(data), c);
  const Batch b = model.make_batch({&data[0], &data[1], &data[2]});
  nd::Graph g(false);
  const BatchLoss loss = batch_loss(g, model, b, ForwardOptions::from(c, false), c.effective_beta());
  EXPECT_GT(loss.values.js, 0.0);
  EXPECT_EQ(loss.values.total, loss.values.j_ae + loss.values.j_sc);
  EXPECT_EQ(loss.total.item(), loss.values.j_ae + loss.values.j_sc);

  for (const auto& r : run_log(c, data)) {
    EXPECT_GT(double(r["js"]), 0.0);
    EXPECT_NEAR(double(r["total"]), double(r["j_ae"]) + double(r["j_sc"]), 1e-12);
  }
}

TEST(Train, LogsAreSeedDeterministic) {
  const auto data = toy_corpus();
  TrainConfig c = small_config();
  const auto a = run_log(c, data), b = run_log(c, data);
  ASSERT_EQ(a.size(), 3u);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].dump(), b[i].dump());
  c.seed = 99;
  EXPECT_NE(run_log(c, data)[0].dump(), a[0].dump());
}

TEST(Train, MetricRecordFields) {
  const auto data = toy_corpus();
  const auto log = run_log(small_config(), data);
  for (const char* k : {"epoch", "j_ae", "j_sc", "js", "total", "dev_f1", "dev_ae_f1", "dev_sc_acc"})
    EXPECT_TRUE(log[0].contains(k)) << k;
}

TEST(Train, EarlyStoppingRestoresBestWeights) {
  const auto data = toy_corpus();
  TrainConfig c = small_config();
  c.epochs = 12;
  c.patience = 2;
  HiAsaModel model(Vocabulary::build(data), c);
  const TrainResult r = train(model, c, data, data);
  ASSERT_GE(r.best_epoch, 1u);
  const MetricReport now = evaluate_model(model, data, c);
  EXPECT_EQ(now.joint.f1, r.best_dev_f1);
  if (r.early_stopped) EXPECT_EQ(r.log.size(), r.best_epoch + c.patience);
}

TEST(ModelGradCheck, AllInteractionConfigs) {
  const auto data = toy_corpus();
  for (double alpha : {0.0, 0.1})
    for (double beta : {0.0, 0.1}) {
      TrainConfig c = small_config();
      c.alpha = alpha;
      c.beta = beta;
      HiAsaModel model(Vocabulary::build({data[0], data[1]}), c);
      const Batch b = model.make_batch({&data[0], &data[1]});
      const auto r1 = model_grad_check(model, c, b);
      const auto r2 = model_grad_check(model, c, b);
      EXPECT_LT(r1.max_rel_error, 1e-4) << "alpha " << alpha << " beta " << beta;
      EXPECT_EQ(r1.max_rel_error, r2.max_rel_error);
      EXPECT_EQ(r1.entries, values_of(model.params()).size());
    }
}

TEST(BatchLoss, PaddedBatchMatchesUnbatchedAggregate) {
  const auto data = toy_corpus();
  TrainConfig c = small_config();
  HiAsaModel model(Vocabulary::build(data), c);
  const ForwardOptions fwd = ForwardOptions::from(c, false);
  std::vector<const SentenceExample*> ptrs;
  for (std::size_t i = 0; i < 6; ++i) ptrs.push_back(&data[i]);

  nd::Graph g;
  const LossTerms batched = model.loss_terms(g, model.make_batch(ptrs), fwd);
  double ae = 0, sc = 0, js = 0;
  std::size_t aspects = 0, js_sents = 0;
  for (const auto* ex : ptrs) {
    nd::Graph g1;
    const LossTerms one = model.loss_terms(g1, model.make_batch({ex}), fwd);
    ae += one.j_ae.item();
    sc += one.j_sc.item() * double(one.aspect_count);
    js += one.js.item() * double(one.js_sentences);
    aspects += one.aspect_count;
    js_sents += one.js_sentences;
  }
  EXPECT_NEAR(batched.j_ae.item() * double(ptrs.size()), ae, 1e-6 * ae);
  EXPECT_NEAR(batched.j_sc.item() * double(aspects), sc, 1e-6 * sc);
  EXPECT_NEAR(batched.js.item() * double(js_sents), js, 1e-6 * js);
  EXPECT_EQ(batched.aspect_count, aspects);
  EXPECT_EQ(batched.js_sentences, js_sents);
}

TEST(Train, SentencesWithoutAspectsOnlyFeedBoundaryLoss) {
  SentenceExample ex;
  ex.id = "none";
  ex.tokens = {"i", "used", "the", "screen", "today", "."};
  TrainConfig c = small_config();
  HiAsaModel model(Vocabulary::build({ex}), c);
  nd::Graph g;
  const LossTerms t = model.loss_terms(g, model.make_batch({&ex}), ForwardOptions::from(c, false));
  EXPECT_GT(t.j_ae.item(), 0.0);
  EXPECT_EQ(t.j_sc.item(), 0.0);
  EXPECT_EQ(t.js.item(), 0.0);
  EXPECT_EQ(t.aspect_count, 0u);
  EXPECT_EQ(t.js_sentences, 0u);
}

TEST(Train, JsTermReachesBothHeads) {
  const auto data = toy_corpus();
  TrainConfig c = small_config();
  HiAsaModel model(Vocabulary::build(data), c);
  const Batch b = model.make_batch({&data[0], &data[1]});
  auto grad_mass = [&](const std::string& name) {
    double s = 0;
    for (double v : model.params().at(name).grad()) s += std::abs(v);
    return s;
  };
  for (double beta : {0.1, 0.0}) {
    model.params().zero_grad();
    nd::Graph g;
    const LossTerms t = model.loss_terms(g, b, ForwardOptions::from(c, false));
    nd::Var zero = g.constant(nd::Tensor({1, 1}));
    g.backward(total_loss(zero, zero, t.js, beta));
    for (const char* name : {"aspect.v_start", "aspect.v_end", "sentiment_gru.w", "sentiment_gru.u"}) {
      if (beta > 0) EXPECT_GT(grad_mass(name), 0.0) << name;
      else EXPECT_EQ(grad_mass(name), 0.0) << name;
    }
  }
}

TEST(Train, OverfitsEightSentenceCorpus) {
  const auto data = overfit_corpus();
  TrainConfig c;
  c.epochs = 200;
  c.patience = 0;
  HiAsaModel model(Vocabulary::build(data), c);
  const TrainResult r = train(model, c, data, {});
  EXPECT_EQ(r.best_dev_f1, 1.0);
  EXPECT_EQ(evaluate_model(model, data, c).joint.f1, 1.0);

  // After a warmup, the mean loss of each 5-epoch block does not exceed the previous block's.
  std::vector<double> blocks;
  for (std::size_t i = 10; i + 5 <= r.log.size(); i += 5) {
    double s = 0;
    for (std::size_t k = i; k < i + 5; ++k) s += r.log[k].total;
    blocks.push_back(s / 5);
  }
  for (std::size_t i = 1; i < blocks.size(); ++i) EXPECT_LE(blocks[i], blocks[i - 1]) << "block " << i;
  EXPECT_LT(r.log.back().total, r.log.front().total);
}

TEST(Train, RejectsNonFiniteLoss) {
  const auto data = toy_corpus();
  TrainConfig c = small_config();
  HiAsaModel model(Vocabulary::build(data), c);
  model.params().at("aspect.v_start")[0] = std::nan("");
  try {
    train(model, c, data, {});
    FAIL() << "expected NumericError";
  } catch (const nd::NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("step 1"), std::string::npos) << e.what();
  }
}

TEST(Config, ParseApplyAndRoundTrip) {
  TrainConfig c;
  EXPECT_EQ(c.batch_size, 32u);
  EXPECT_EQ(c.dropout, 0.1);
  EXPECT_EQ(c.attention_hops, 2u);
  apply_config_text(c, "# comment\nalpha = 0.25\n\nbeta=0.5  # trailing\nno-deep = true\ntrain = a.jsonl\n");
  EXPECT_EQ(c.alpha, 0.25);
  EXPECT_EQ(c.beta, 0.5);
  EXPECT_TRUE(c.no_deep);
  EXPECT_EQ(c.effective_beta(), 0.0);
  EXPECT_EQ(c.train_path, "a.jsonl");

  TrainConfig d;
  apply_config_text(d, to_text(c));
  EXPECT_EQ(to_text(d), to_text(c));
  EXPECT_EQ(config_hash(d), config_hash(c));
  d.train_path = "elsewhere";
  EXPECT_EQ(config_hash(d), config_hash(c));
  d.alpha = 0.2;
  EXPECT_NE(config_hash(d), config_hash(c));
}

TEST(Config, Errors) {
  TrainConfig c;
  EXPECT_THROW(apply_config_text(c, "gamma = 1"), ConfigError);
  EXPECT_THROW(apply_config_text(c, "alpha 0.1"), ConfigError);
  EXPECT_THROW(apply_config_text(c, "epochs = -3"), ConfigError);
  EXPECT_THROW(apply_config_text(c, "lr = fast"), ConfigError);
  EXPECT_THROW(apply_config_text(c, "no-shallow = maybe"), ConfigError);
  c.alpha = 0.6;
  EXPECT_THROW(validate(c), ConfigError);
  c = TrainConfig{};
  c.embed_dim = 5;
  EXPECT_THROW(validate(c), ConfigError);
  c = TrainConfig{};
  c.tau_start = 1.0;
  EXPECT_THROW(validate(c), ConfigError);
}

TEST(Config, EveryFieldHasUniqueKey) {
  std::set<std::string> keys;
  for (const auto& f : config_fields()) EXPECT_TRUE(keys.insert(f.key).second) << f.key;
  for (const char* k : {"alpha", "beta", "no-shallow", "no-deep", "tau-start", "tau-end", "max-span-len",
                        "attention-hops", "seed", "epochs", "lr", "batch-size", "out"})
    EXPECT_TRUE(keys.count(k)) << k;
}

TEST(Checkpoint, SaveLoadReproducesPredictions) {
  const auto data = toy_corpus();
  TrainConfig c = small_config();
  c.epochs = 2;
  HiAsaModel model(Vocabulary::build(data), c);
  train(model, c, data, {});
  const auto path = std::filesystem::temp_directory_path() / "hiasa_test_model.ckpt";
  save_model(path.string(), model, c, 17);
  LoadedModel lm = load_model(path.string());
  EXPECT_EQ(lm.step, 17u);
  EXPECT_EQ(to_text(lm.config, false), to_text(c, false));
  EXPECT_EQ(values_of(lm.model->params()), values_of(model.params()));
  const auto a = model.predict(data, ForwardOptions::from(c, false), decode_options(c));
  const auto b = lm.model->predict(data, ForwardOptions::from(lm.config, false), decode_options(lm.config));
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(to_json(a[i]).dump(), to_json(b[i]).dump());
  std::filesystem::remove(path);
}
