#pragma once

// Key-value config files, a TOML subset: one `key = value` per line, `#`
// comments, values are numbers, "strings", bare words or [a, b, ...] lists.

#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "equiscalar/core_types.hpp"
#include "equiscalar/mpnn.hpp"

namespace equiscalar {

class KeyValueConfig {
 public:
  static KeyValueConfig parse(const std::string& text, const std::string& source = "config") {
    KeyValueConfig c;
    c.source_ = source;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const std::string where = source + ":" + std::to_string(lineno);
      line = strip_comment(line);
      line = trim(line);
      if (line.empty()) continue;
      if (line.front() == '[' && line.back() == ']') continue;  // section headers are ignored
      const auto eq = line.find('=');
      if (eq == std::string::npos) throw Error(ErrorCode::Parse, where + ": expected key = value");
      const std::string key = trim(line.substr(0, eq));
      std::string value = trim(line.substr(eq + 1));
      if (key.empty()) throw Error(ErrorCode::Parse, where + ": empty key");
      if (value.empty()) throw Error(ErrorCode::Parse, where + ": empty value for '" + key + "'");
      if (c.values_.count(key)) throw Error(ErrorCode::Parse, where + ": duplicate key '" + key + "'");
      if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
      c.values_[key] = {value, where};
    }
    return c;
  }

  [[nodiscard]] bool has(const std::string& key) const { return values_.count(key) != 0; }

  [[nodiscard]] std::string get_string(const std::string& key, const std::string& fallback) const {
    const auto it = find(key);
    return it ? it->text : fallback;
  }

  [[nodiscard]] double get_double(const std::string& key, double fallback) const {
    const auto it = find(key);
    return it ? to_double(it->text, it->where, key) : fallback;
  }

  [[nodiscard]] std::uint64_t get_uint(const std::string& key, std::uint64_t fallback) const {
    const auto it = find(key);
    return it ? to_uint(it->text, it->where, key) : fallback;
  }

  [[nodiscard]] std::vector<std::size_t> get_uint_list(const std::string& key, std::vector<std::size_t> fallback) const {
    const auto it = find(key);
    if (!it) return fallback;
    const std::string& t = it->text;
    if (t.size() < 2 || t.front() != '[' || t.back() != ']') {
      throw Error(ErrorCode::Parse, it->where + ": '" + key + "' must be a list like [16, 16]");
    }
    std::vector<std::size_t> out;
    std::istringstream items(t.substr(1, t.size() - 2));
    std::string item;
    while (std::getline(items, item, ','))
      if (!trim(item).empty()) out.push_back(static_cast<std::size_t>(to_uint(trim(item), it->where, key)));
    return out;
  }

  /// Keys present in the file but not in `known`.
  [[nodiscard]] std::vector<std::string> unknown_keys(const std::set<std::string>& known) const {
    std::vector<std::string> out;
    for (const auto& [k, v] : values_)
      if (!known.count(k)) out.push_back(k);
    return out;
  }

 private:
  struct Entry {
    std::string text;
    std::string where;
  };

  [[nodiscard]] const Entry* find(const std::string& key) const {
    const auto it = values_.find(key);
    return it == values_.end() ? nullptr : &it->second;
  }

  static std::string strip_comment(const std::string& s) {
    bool quoted = false;
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (s[i] == '"') quoted = !quoted;
      if (s[i] == '#' && !quoted) return s.substr(0, i);
    }
    return s;
  }

  static std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
  }

  static double to_double(const std::string& t, const std::string& where, const std::string& key) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(t, &used);
    } catch (const std::logic_error&) {
      used = 0;
    }
    if (used != t.size() || used == 0) throw Error(ErrorCode::Parse, where + ": '" + key + "' must be a number");
    return v;
  }

  static std::uint64_t to_uint(const std::string& t, const std::string& where, const std::string& key) {
    std::size_t used = 0;
    std::uint64_t v = 0;
    try {
      if (!t.empty() && t[0] != '-') v = std::stoull(t, &used);
    } catch (const std::logic_error&) {
      used = 0;
    }
    if (used != t.size() || used == 0) {
      throw Error(ErrorCode::Parse, where + ": '" + key + "' must be a non-negative integer");
    }
    return v;
  }

  std::string source_;
  std::map<std::string, Entry> values_;
};

/// Everything the train command needs from its config file.
struct TrainSetup {
  std::size_t n_particles = 4;
  std::size_t n_samples = 2000;
  std::uint64_t data_seed = 0;
  std::uint64_t init_seed = 0;
  MpnnConfig model;
  TrainConfig train;
};

inline const std::set<std::string>& train_config_keys() {
  static const std::set<std::string> keys{"n_particles", "n_samples", "layers",   "T",          "widths",
                                          "activation",  "lr",        "epochs",   "batch",      "seed",
                                          "edge_channels", "input",   "val_fraction", "threads", "data_seed",
                                          "init_seed"};
  return keys;
}

/// edge_channels counts edge-feature channels: 3 is (q_i q_j, |dr|^2, v.v),
/// 4 adds the inverse distance and every channel beyond 4 is a Gaussian
/// radial bump. data_seed and init_seed default to seed + 1 and seed + 2.
inline TrainSetup train_setup(const KeyValueConfig& c) {
  const auto unknown = c.unknown_keys(train_config_keys());
  if (!unknown.empty()) throw Error(ErrorCode::InvalidArgument, "unknown config key '" + unknown.front() + "'");
  if (c.has("layers") && c.has("T")) throw Error(ErrorCode::InvalidArgument, "give either 'layers' or 'T', not both");
  TrainSetup s;
  s.n_particles = c.get_uint("n_particles", s.n_particles);
  s.n_samples = c.get_uint("n_samples", s.n_samples);
  s.model.n_particles = s.n_particles;
  s.model.layers = c.get_uint(c.has("T") ? "T" : "layers", s.model.layers);
  s.model.widths = c.get_uint_list("widths", s.model.widths);
  s.model.activation = parse_activation(c.get_string("activation", "tanh"));
  const std::string input = c.get_string("input", "full-concat");
  if (input != "full-concat" && input != "pooled") {
    throw Error(ErrorCode::InvalidArgument, "input must be full-concat or pooled");
  }
  s.model.input = input == "pooled" ? MessageInput::Pooled : MessageInput::FullConcat;
  const std::size_t channels = c.get_uint("edge_channels", 4);
  if (channels < 3) throw Error(ErrorCode::InvalidArgument, "edge_channels must be at least 3");
  s.model.edges.inverse_distance = channels >= 4;
  s.model.edges.rbf_count = channels > 4 ? channels - 4 : 0;
  s.train.lr = c.get_double("lr", s.train.lr);
  s.train.epochs = c.get_uint("epochs", s.train.epochs);
  s.train.batch = c.get_uint("batch", s.train.batch);
  s.train.val_fraction = c.get_double("val_fraction", s.train.val_fraction);
  s.train.threads = c.get_uint("threads", s.train.threads);
  if (!c.has("seed")) throw Error(ErrorCode::InvalidArgument, "config must set 'seed'");
  s.train.seed = c.get_uint("seed", 0);
  s.data_seed = c.get_uint("data_seed", s.train.seed + 1);
  s.init_seed = c.get_uint("init_seed", s.train.seed + 2);
  return s;
}

}  // namespace equiscalar
