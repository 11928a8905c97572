#pragma once

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace hiasa {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct TrainConfig {
  double alpha = 0.1;          // cross-stitch transfer weight, [0, 0.5]
  double beta = 0.1;           // JS-divergence weight, >= 0
  double lr = 1e-3;            // 3e-5 is the BERT-scale value; too small for this backbone
  std::size_t batch_size = 32;
  std::size_t epochs = 100;
  double dropout = 0.1;
  std::size_t embed_dim = 64;  // d
  std::size_t hidden_dim = 64; // d-hat
  std::size_t attention_hops = 2;
  double tau_start = 0.5;
  double tau_end = 0.5;
  std::size_t max_span_len = 8;
  std::uint64_t seed = 13;
  bool no_shallow = false;
  bool no_deep = false;
  std::size_t patience = 20;
  std::string train_path;
  std::string dev_path;
  std::string out;

  double effective_alpha() const { return no_shallow ? 0.0 : alpha; }
  double effective_beta() const { return no_deep ? 0.0 : beta; }
};

inline void validate(const TrainConfig& c) {
  auto fail = [](const std::string& m) { throw ConfigError(m); };
  if (!(c.alpha >= 0.0 && c.alpha <= 0.5)) fail("alpha must lie in [0, 0.5]");
  if (!(c.beta >= 0.0)) fail("beta must be non-negative");
  if (!(c.lr > 0.0)) fail("lr must be positive");
  if (c.batch_size < 1) fail("batch-size must be at least 1");
  if (!(c.dropout >= 0.0 && c.dropout < 1.0)) fail("dropout must lie in [0, 1)");
  if (c.embed_dim < 2 || c.embed_dim % 2 != 0) fail("embed-dim must be even and at least 2");
  if (c.hidden_dim < 1) fail("hidden-dim must be at least 1");
  if (c.attention_hops < 1) fail("attention-hops must be at least 1");
  if (!(c.tau_start > 0.0 && c.tau_start < 1.0)) fail("tau-start must lie in (0, 1)");
  if (!(c.tau_end > 0.0 && c.tau_end < 1.0)) fail("tau-end must lie in (0, 1)");
  if (c.max_span_len < 1) fail("max-span-len must be at least 1");
}

namespace detail {

inline std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline double parse_double(std::string_view key, const std::string& s) {
  try {
    std::size_t pos = 0;
    double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("'" + std::string(key) + "' expects a number, got '" + s + "'");
  }
}

inline std::uint64_t parse_uint(std::string_view key, const std::string& s) {
  std::uint64_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size())
    throw ConfigError("'" + std::string(key) + "' expects a non-negative integer, got '" + s + "'");
  return v;
}

inline bool parse_bool(std::string_view key, const std::string& s) {
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw ConfigError("'" + std::string(key) + "' expects true/false, got '" + s + "'");
}

}  // namespace detail

/// One TrainConfig field. The key doubles as the config-file key and the
/// long CLI flag name.
struct ConfigField {
  std::string key;
  std::string help;
  enum class Kind { real, integer, flag, path } kind;
  bool model_relevant;  // participates in the config hash
  std::function<void(TrainConfig&, const std::string&)> set;
  std::function<std::string(const TrainConfig&)> get;
};

inline const std::vector<ConfigField>& config_fields() {
  using K = ConfigField::Kind;
  auto real = [](std::string key, std::string help, double TrainConfig::*m) {
    return ConfigField{key, std::move(help), K::real, true,
                       [key, m](TrainConfig& c, const std::string& s) { c.*m = detail::parse_double(key, s); },
                       [m](const TrainConfig& c) { return detail::fmt_double(c.*m); }};
  };
  auto integer = [](std::string key, std::string help, std::size_t TrainConfig::*m) {
    return ConfigField{key, std::move(help), K::integer, true,
                       [key, m](TrainConfig& c, const std::string& s) {
                         c.*m = static_cast<std::size_t>(detail::parse_uint(key, s));
                       },
                       [m](const TrainConfig& c) { return std::to_string(c.*m); }};
  };
  auto flag = [](std::string key, std::string help, bool TrainConfig::*m) {
    return ConfigField{key, std::move(help), K::flag, true,
                       [key, m](TrainConfig& c, const std::string& s) { c.*m = detail::parse_bool(key, s); },
                       [m](const TrainConfig& c) { return std::string(c.*m ? "true" : "false"); }};
  };
  auto path = [](std::string key, std::string help, std::string TrainConfig::*m) {
    return ConfigField{key, std::move(help), K::path, false,
                       [m](TrainConfig& c, const std::string& s) { c.*m = s; },
                       [m](const TrainConfig& c) { return c.*m; }};
  };
  static const std::vector<ConfigField> fields = {
      real("alpha", "cross-stitch transfer weight in [0, 0.5]", &TrainConfig::alpha),
      real("beta", "weight of the JS-divergence term", &TrainConfig::beta),
      real("lr", "Adam learning rate", &TrainConfig::lr),
      integer("batch-size", "sentences per batch", &TrainConfig::batch_size),
      integer("epochs", "maximum training epochs", &TrainConfig::epochs),
      real("dropout", "dropout rate applied to encoder features", &TrainConfig::dropout),
      integer("embed-dim", "token feature size d (even)", &TrainConfig::embed_dim),
      integer("hidden-dim", "task feature size d-hat", &TrainConfig::hidden_dim),
      integer("attention-hops", "attention refinement hops", &TrainConfig::attention_hops),
      real("tau-start", "start-score decoding threshold", &TrainConfig::tau_start),
      real("tau-end", "end-score decoding threshold", &TrainConfig::tau_end),
      integer("max-span-len", "longest decoded aspect span", &TrainConfig::max_span_len),
      ConfigField{"seed", "random seed", K::integer, true,
                  [](TrainConfig& c, const std::string& s) { c.seed = detail::parse_uint("seed", s); },
                  [](const TrainConfig& c) { return std::to_string(c.seed); }},
      flag("no-shallow", "disable shallow interaction (forces alpha = 0)", &TrainConfig::no_shallow),
      flag("no-deep", "disable deep interaction (forces beta = 0)", &TrainConfig::no_deep),
      integer("patience", "early-stopping patience in epochs", &TrainConfig::patience),
      path("train", "training corpus path", &TrainConfig::train_path),
      path("dev", "development corpus path", &TrainConfig::dev_path),
      path("out", "output path or directory", &TrainConfig::out),
  };
  return fields;
}

inline const ConfigField* find_field(std::string_view key) {
  for (const auto& f : config_fields())
    if (f.key == key) return &f;
  return nullptr;
}

inline void set_field(TrainConfig& c, std::string_view key, const std::string& value) {
  const ConfigField* f = find_field(key);
  if (f == nullptr) throw ConfigError("unknown configuration key '" + std::string(key) + "'");
  f->set(c, value);
}

/// Applies `key = value` lines onto `c`. Blank lines and '#' comments are ignored.
inline void apply_config_text(TrainConfig& c, std::string_view text) {
  std::istringstream is{std::string(text)};
  std::string line;
  std::size_t no = 0;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return std::string{};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  };
  while (std::getline(is, line)) {
    ++no;
    if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(no) + ": expected key = value");
    set_field(c, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
}

inline void apply_config_file(TrainConfig& c, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  apply_config_text(c, ss.str());
}

inline std::string to_text(const TrainConfig& c, bool include_paths = true) {
  std::string out;
  for (const auto& f : config_fields()) {
    if (!include_paths && !f.model_relevant) continue;
    out += f.key + " = " + f.get(c) + "\n";
  }
  return out;
}

/// FNV-1a over the canonical text of all non-path fields.
inline std::uint64_t config_hash(const TrainConfig& c) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char ch : to_text(c, false)) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace hiasa
