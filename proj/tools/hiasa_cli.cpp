// hiasa: train, evaluate, decode, gradient-check and run experiment grids.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>

#include "CLI11.hpp"
#include "hiasa/experiments.hpp"
#include "hiasa/hiasa.hpp"

#ifndef HIASA_DATA_DIR
#define HIASA_DATA_DIR "data"
#endif

namespace fs = std::filesystem;
using namespace hiasa;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;
constexpr double kGradCheckLimit = 1e-3;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

int log_level() {
  const char* v = std::getenv("HIASA_LOG");
  return v ? std::atoi(v) : 1;
}

std::string bundled_corpus() { return std::string(HIASA_DATA_DIR) + "/toy.jsonl"; }

// Raw option values for one subcommand, keyed by config field.
struct VerbOptions {
  std::map<std::string, std::string> values;
  std::map<std::string, CLI::Option*> opts;
  std::string config_file;
  std::string checkpoint;
  std::string data;
  double step = 1e-5;
};

void add_config_options(CLI::App* cmd, VerbOptions& o) {
  cmd->add_option("--config", o.config_file, "key = value configuration file")->check(CLI::ExistingFile);
  for (const auto& f : config_fields()) {
    const std::string flag = "--" + f.key;
    if (f.kind == ConfigField::Kind::flag)
      o.opts[f.key] = cmd->add_flag(flag, f.help);
    else
      o.opts[f.key] = cmd->add_option(flag, o.values[f.key], f.help);
  }
}

bool given(const VerbOptions& o, const std::string& key) { return o.opts.at(key)->count() > 0; }

void apply_overrides(TrainConfig& cfg, const VerbOptions& o) {
  for (const auto& f : config_fields()) {
    if (!given(o, f.key)) continue;
    set_field(cfg, f.key, f.kind == ConfigField::Kind::flag ? "true" : o.values.at(f.key));
  }
}

TrainConfig resolve(const VerbOptions& o) {
  TrainConfig cfg;
  if (!o.config_file.empty()) apply_config_file(cfg, o.config_file);
  apply_overrides(cfg, o);
  validate(cfg);
  return cfg;
}

std::vector<SentenceExample> load(const std::string& path) {
  if (!fs::exists(path)) throw UsageError("dataset '" + path + "' does not exist");
  return parse_dataset(path);
}

fs::path out_dir(const TrainConfig& cfg, const char* fallback) {
  fs::path dir = cfg.out.empty() ? fs::path(fallback) : fs::path(cfg.out);
  fs::create_directories(dir);
  return dir;
}

void write_lines(const fs::path& path, const std::vector<nlohmann::json>& records) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write '" + path.string() + "'");
  for (const auto& r : records) os << r.dump() << '\n';
}

std::function<void(const EpochRecord&)> epoch_printer(const std::string& tag) {
  if (log_level() < 1) return {};
  return [tag](const EpochRecord& r) {
    std::fprintf(stderr, "[%s] epoch %zu total %.5f j_ae %.5f j_sc %.5f js %.5f dev_f1 %.4f\n", tag.c_str(),
                 r.epoch, r.total, r.j_ae, r.j_sc, r.js, r.dev_f1);
  };
}

int cmd_train(const VerbOptions& o) {
  TrainConfig cfg = resolve(o);
  if (cfg.train_path.empty()) cfg.train_path = bundled_corpus();
  const auto train_set = load(cfg.train_path);
  const auto dev_set = cfg.dev_path.empty() ? std::vector<SentenceExample>{} : load(cfg.dev_path);
  const fs::path dir = out_dir(cfg, "hiasa_out");

  HiAsaModel model(Vocabulary::build(train_set), cfg);
  std::vector<nlohmann::json> log;
  auto printer = epoch_printer("train");
  TrainResult res = train(model, cfg, train_set, dev_set, [&](const EpochRecord& r) {
    log.push_back(to_json(r));
    if (printer) printer(r);
  });
  save_model((dir / "model.ckpt").string(), model, cfg, res.steps);
  write_lines(dir / "metrics.jsonl", log);
  std::ofstream(dir / "config.cfg") << to_text(cfg);
  std::cout << "best epoch " << res.best_epoch << " dev joint F1 " << res.best_dev_f1 << "\n"
            << "checkpoint " << (dir / "model.ckpt").string() << "\n";
  return 0;
}

LoadedModel load_for_inference(const VerbOptions& o) {
  if (o.checkpoint.empty()) throw UsageError("--checkpoint is required");
  if (!fs::exists(o.checkpoint)) throw UsageError("checkpoint '" + o.checkpoint + "' does not exist");
  LoadedModel lm = load_model(o.checkpoint);
  // Inference-time knobs may be overridden; model shape comes from the checkpoint.
  for (const char* key : {"tau-start", "tau-end", "max-span-len", "batch-size", "attention-hops", "out"})
    if (given(o, key)) set_field(lm.config, key, o.values.at(key));
  validate(lm.config);
  return lm;
}

int cmd_evaluate(const VerbOptions& o) {
  LoadedModel lm = load_for_inference(o);
  if (o.data.empty()) throw UsageError("--data is required");
  const auto data = load(o.data);
  const MetricReport r = evaluate_model(*lm.model, data, lm.config);
  std::cout << format_table(r);
  if (!lm.config.out.empty()) std::ofstream(lm.config.out) << to_json(r).dump() << '\n';
  else std::cout << to_json(r).dump() << '\n';
  return 0;
}

int cmd_decode(const VerbOptions& o) {
  LoadedModel lm = load_for_inference(o);
  if (o.data.empty()) throw UsageError("--data is required");
  const auto data = load(o.data);
  const auto preds = lm.model->predict(data, ForwardOptions::from(lm.config, false), decode_options(lm.config),
                                       lm.config.batch_size);
  std::ofstream file;
  if (!lm.config.out.empty()) file.open(lm.config.out);
  std::ostream& os = lm.config.out.empty() ? std::cout : file;
  for (const auto& p : preds) os << to_json(p).dump() << '\n';
  return 0;
}

int cmd_gradcheck(const VerbOptions& o) {
  TrainConfig cfg;
  cfg.embed_dim = 8;
  cfg.hidden_dim = 6;
  if (!o.config_file.empty()) apply_config_file(cfg, o.config_file);
  apply_overrides(cfg, o);
  validate(cfg);
  const auto data = load(o.data.empty() ? bundled_corpus() : o.data);
  if (data.size() < 2) throw UsageError("gradcheck needs at least two sentences");
  std::vector<SentenceExample> toy(data.begin(), data.begin() + 2);
  HiAsaModel model(Vocabulary::build(toy), cfg);
  const Batch b = model.make_batch({&toy[0], &toy[1]});
  const nd::GradCheckResult r = model_grad_check(model, cfg, b, o.step);
  std::cout << "parameters " << r.entries << " max relative error " << r.max_rel_error << "\n";
  return r.max_rel_error > kGradCheckLimit ? kExitRuntime : 0;
}

std::pair<std::vector<SentenceExample>, std::vector<SentenceExample>> experiment_data(TrainConfig& cfg) {
  if (cfg.train_path.empty()) cfg.train_path = bundled_corpus();
  auto train_set = load(cfg.train_path);
  auto dev_set = cfg.dev_path.empty() ? std::vector<SentenceExample>{} : load(cfg.dev_path);
  return {std::move(train_set), std::move(dev_set)};
}

int report_runs(const std::vector<RunSummary>& rows, const TrainConfig& cfg, const char* dirname,
                const char* file) {
  const fs::path dir = out_dir(cfg, dirname);
  std::vector<nlohmann::json> recs;
  for (const auto& r : rows) recs.push_back(to_json(r));
  write_lines(dir / file, recs);
  std::cout << format_runs(rows);
  return 0;
}

int cmd_sweep(const VerbOptions& o) {
  TrainConfig cfg = resolve(o);
  auto [train_set, dev_set] = experiment_data(cfg);
  return report_runs(sweep_alpha(cfg, train_set, dev_set), cfg, "hiasa_sweep", "sweep.jsonl");
}

int cmd_ablate(const VerbOptions& o) {
  TrainConfig cfg = resolve(o);
  auto [train_set, dev_set] = experiment_data(cfg);
  return report_runs(ablate(cfg, train_set, dev_set), cfg, "hiasa_ablate", "ablation.jsonl");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Joint span-based aspect-sentiment analysis with hierarchical task interaction"};
  app.require_subcommand(1);

  struct Verb {
    const char* name;
    const char* help;
    int (*run)(const VerbOptions&);
  };
  const Verb verbs[] = {
      {"train", "train a model; writes model.ckpt, metrics.jsonl and config.cfg under --out", cmd_train},
      {"evaluate", "score a checkpoint on --data (joint F1, AE F1, SC accuracy)", cmd_evaluate},
      {"decode", "write predicted spans for --data as line-delimited JSON", cmd_decode},
      {"gradcheck", "finite-difference check of the full objective on two sentences", cmd_gradcheck},
      {"sweep-alpha", "train once per alpha in {0.0,...,0.5} and tabulate dev metrics", cmd_sweep},
      {"ablate", "train full, no-shallow and no-deep variants and tabulate dev metrics", cmd_ablate},
  };
  std::map<std::string, VerbOptions> options;
  std::map<CLI::App*, const Verb*> dispatch;
  for (const Verb& v : verbs) {
    CLI::App* cmd = app.add_subcommand(v.name, v.help);
    VerbOptions& o = options[v.name];
    add_config_options(cmd, o);
    if (std::string(v.name) == "evaluate" || std::string(v.name) == "decode") {
      cmd->add_option("--checkpoint", o.checkpoint, "model checkpoint");
      cmd->add_option("--data", o.data, "dataset to score");
    }
    if (std::string(v.name) == "gradcheck") {
      cmd->add_option("--data", o.data, "dataset (first two sentences are used)");
      cmd->add_option("--step", o.step, "central-difference step");
    }
    dispatch[cmd] = &v;
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  for (auto& [cmd, verb] : dispatch) {
    if (!cmd->parsed()) continue;
    try {
      return verb->run(options[verb->name]);
    } catch (const UsageError& e) {
      std::cerr << "usage error: " << e.what() << "\n";
      return kExitUsage;
    } catch (const ConfigError& e) {
      std::cerr << "configuration error: " << e.what() << "\n";
      return kExitUsage;
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << "\n";
      return kExitRuntime;
    }
  }
  return kExitUsage;
}
