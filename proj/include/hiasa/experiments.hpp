#pragma once

#include <array>
#include <cstdio>
#include <string>
#include <vector>

#include "hiasa/trainer.hpp"

namespace hiasa {

/// Alpha values swept by `sweep-alpha`.
inline constexpr std::array<double, 6> kAlphaGrid = {0.0, 0.1, 0.2, 0.3, 0.4, 0.5};

struct RunSummary {
  std::string label;
  TrainConfig config;
  TrainResult result;
  MetricReport dev;
};

/// Trains a fresh model (vocabulary from the training set) and scores the
/// best-dev weights on the dev set (or the training set when dev is empty).
inline RunSummary run_config(const std::string& label, const TrainConfig& cfg,
                             const std::vector<SentenceExample>& train_set,
                             const std::vector<SentenceExample>& dev_set,
                             const std::function<void(const EpochRecord&)>& on_epoch = {}) {
  HiAsaModel model(Vocabulary::build(train_set), cfg);
  RunSummary s{label, cfg, train(model, cfg, train_set, dev_set, on_epoch), {}};
  s.dev = evaluate_model(model, dev_set.empty() ? train_set : dev_set, cfg);
  return s;
}

inline std::vector<RunSummary> sweep_alpha(const TrainConfig& base, const std::vector<SentenceExample>& train_set,
                                           const std::vector<SentenceExample>& dev_set) {
  std::vector<RunSummary> rows;
  for (double a : kAlphaGrid) {
    TrainConfig cfg = base;
    cfg.alpha = a;
    cfg.no_shallow = false;
    char label[32];
    std::snprintf(label, sizeof label, "alpha=%.1f", a);
    rows.push_back(run_config(label, cfg, train_set, dev_set));
  }
  return rows;
}

/// Full model, then without shallow interaction, then without deep interaction.
inline std::vector<RunSummary> ablate(const TrainConfig& base, const std::vector<SentenceExample>& train_set,
                                      const std::vector<SentenceExample>& dev_set) {
  TrainConfig full = base;
  full.no_shallow = false;
  full.no_deep = false;
  TrainConfig no_si = full;
  no_si.no_shallow = true;
  TrainConfig no_di = full;
  no_di.no_deep = true;
  return {run_config("full", full, train_set, dev_set), run_config("w/o shallow", no_si, train_set, dev_set),
          run_config("w/o deep", no_di, train_set, dev_set)};
}

inline nlohmann::json to_json(const RunSummary& s) {
  return {{"label", s.label},
          {"alpha", s.config.effective_alpha()},
          {"beta", s.config.effective_beta()},
          {"best_epoch", s.result.best_epoch},
          {"epochs_run", s.result.log.size()},
          {"dev", to_json(s.dev)}};
}

inline std::string format_runs(const std::vector<RunSummary>& rows) {
  std::string out = "run            alpha  beta    joint_f1  ae_f1     sc_acc    best_epoch\n";
  for (const auto& r : rows) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%-14s %-6.2f %-7.3f %-9.4f %-9.4f %-9.4f %zu\n", r.label.c_str(),
                  r.config.effective_alpha(), r.config.effective_beta(), r.dev.joint.f1, r.dev.ae.f1,
                  r.dev.sc_accuracy, r.result.best_epoch);
    out += buf;
  }
  return out;
}

}  // namespace hiasa
