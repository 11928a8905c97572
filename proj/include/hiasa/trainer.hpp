#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "hiasa/config.hpp"
#include "hiasa/evalkit.hpp"
#include "hiasa/model.hpp"
#include "hiasa/ndcore/adam.hpp"
#include "hiasa/ndcore/grad_check.hpp"
#include "hiasa/objective.hpp"
#include "json.hpp"

namespace hiasa {

struct EpochRecord {
  std::size_t epoch = 0;
  double j_ae = 0.0;
  double j_sc = 0.0;
  double js = 0.0;
  double total = 0.0;
  double dev_f1 = 0.0;
  double dev_ae_f1 = 0.0;
  double dev_sc_acc = 0.0;
};

inline nlohmann::json to_json(const EpochRecord& r) {
  return {{"epoch", r.epoch},   {"j_ae", r.j_ae},     {"j_sc", r.j_sc},
          {"js", r.js},         {"total", r.total},   {"dev_f1", r.dev_f1},
          {"dev_ae_f1", r.dev_ae_f1}, {"dev_sc_acc", r.dev_sc_acc}};
}

struct TrainResult {
  std::vector<EpochRecord> log;
  std::size_t best_epoch = 0;
  double best_dev_f1 = -1.0;
  std::uint64_t steps = 0;
  bool early_stopped = false;
};

/// Loss terms for one batch combined under the configured weights.
struct BatchLoss {
  LossTerms terms;
  nd::Var total;
  LossBreakdown values;
};

inline BatchLoss batch_loss(nd::Graph& g, const HiAsaModel& model, const Batch& batch,
                            const ForwardOptions& opt, double beta) {
  BatchLoss out;
  out.terms = model.loss_terms(g, batch, opt);
  out.total = total_loss(out.terms.j_ae, out.terms.j_sc, out.terms.js, beta);
  out.values = total_loss(out.terms.j_ae.item(), out.terms.j_sc.item(), out.terms.js.item(), beta);
  return out;
}

inline MetricReport evaluate_model(const HiAsaModel& model, const std::vector<SentenceExample>& data,
                                   const TrainConfig& cfg) {
  return evaluate(model.predict(data, ForwardOptions::from(cfg, false), decode_options(cfg), cfg.batch_size),
                  data);
}

/// Adam on the combined objective with per-epoch shuffling and early
/// stopping on dev joint F1. On return the model holds the best-dev weights.
inline TrainResult train(HiAsaModel& model, const TrainConfig& cfg,
                         const std::vector<SentenceExample>& train_set,
                         const std::vector<SentenceExample>& dev_set,
                         const std::function<void(const EpochRecord&)>& on_epoch = {}) {
  validate(cfg);
  if (train_set.empty()) throw std::invalid_argument("train: empty training set");
  nd::Adam adam({cfg.lr, 0.9, 0.999, 1e-8});
  std::mt19937_64 shuffle_rng(cfg.seed ^ 0x9E3779B97F4A7C15ull);
  const ForwardOptions fwd = ForwardOptions::from(cfg, true);
  const double beta = cfg.effective_beta();

  std::vector<const SentenceExample*> order;
  for (const auto& ex : train_set) order.push_back(&ex);

  TrainResult res;
  nd::ParameterStore best = model.params();
  std::size_t since_best = 0;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    EpochRecord rec;
    rec.epoch = epoch;
    std::size_t n_batches = 0;
    for (std::size_t i = 0; i < order.size(); i += cfg.batch_size) {
      std::vector<const SentenceExample*> chunk(
          order.begin() + static_cast<std::ptrdiff_t>(i),
          order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), i + cfg.batch_size)));
      Batch b = model.make_batch(chunk);
      const std::uint64_t step = res.steps + 1;
      nd::Graph g(true, cfg.seed * 1000003ull + step);
      model.params().zero_grad();
      BatchLoss loss;
      try {
        loss = batch_loss(g, model, b, fwd, beta);
      } catch (const nd::NumericError& e) {
        throw nd::NumericError("step " + std::to_string(step) + ": " + e.what());
      }
      const LossBreakdown& v = loss.values;
      if (!std::isfinite(v.total))
        throw nd::NumericError("step " + std::to_string(step) + ": non-finite loss (j_ae=" +
                               std::to_string(v.j_ae) + ", j_sc=" + std::to_string(v.j_sc) +
                               ", js=" + std::to_string(v.js) + ")");
      g.backward(loss.total);
      adam.step(model.params());
      res.steps = step;
      rec.j_ae += v.j_ae;
      rec.j_sc += v.j_sc;
      rec.js += v.js;
      rec.total += v.total;
      ++n_batches;
    }
    rec.j_ae /= double(n_batches);
    rec.j_sc /= double(n_batches);
    rec.js /= double(n_batches);
    rec.total /= double(n_batches);

    const MetricReport dev = evaluate_model(model, dev_set.empty() ? train_set : dev_set, cfg);
    rec.dev_f1 = dev.joint.f1;
    rec.dev_ae_f1 = dev.ae.f1;
    rec.dev_sc_acc = dev.sc_accuracy;
    res.log.push_back(rec);
    if (on_epoch) on_epoch(rec);

    if (rec.dev_f1 > res.best_dev_f1) {
      res.best_dev_f1 = rec.dev_f1;
      res.best_epoch = epoch;
      best.assign_values(model.params());
      since_best = 0;
    } else if (cfg.patience > 0 && ++since_best >= cfg.patience) {
      res.early_stopped = true;
      break;
    }
  }
  model.params().assign_values(best);
  return res;
}

/// Central-difference check of the full objective over every parameter,
/// dropout disabled.
inline nd::GradCheckResult model_grad_check(HiAsaModel& model, const TrainConfig& cfg, const Batch& batch,
                                            double step = 1e-5) {
  const ForwardOptions fwd = ForwardOptions::from(cfg, false);
  const double beta = cfg.effective_beta();
  std::vector<nd::Tensor*> params;
  for (auto& e : model.params()) params.push_back(&e.tensor);
  return nd::grad_check_detailed(
      [&](nd::Graph& g) { return batch_loss(g, model, batch, fwd, beta).total; }, params, step);
}

}  // namespace hiasa
