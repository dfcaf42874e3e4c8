#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "zic/daezic.hpp"
#include "zic/eval.hpp"
#include "zic/hash.hpp"

namespace zic {

/// Flat key=value text: one pair per line, '#' starts a comment, blank lines
/// ignored. Every key must be consumed, so typos are reported instead of
/// silently falling back to defaults.
class KeyValues {
 public:
  static KeyValues parse(std::istream& in, const std::string& source = "config") {
    KeyValues kv;
    kv.source_ = source;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      line = trim(line);
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos)
        throw ConfigError(source + ":" + std::to_string(line_no) + ": expected key=value, got '" + line + "'");
      const std::string key = trim(line.substr(0, eq));
      if (key.empty()) throw ConfigError(source + ":" + std::to_string(line_no) + ": empty key");
      if (kv.values_.count(key)) throw ConfigError(source + ":" + std::to_string(line_no) + ": duplicate key " + key);
      kv.values_[key] = trim(line.substr(eq + 1));
    }
    return kv;
  }

  static KeyValues parse_string(const std::string& text, const std::string& source = "config") {
    std::istringstream in(text);
    return parse(in, source);
  }

  static KeyValues load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    return parse(in, path);
  }

  bool has(const std::string& key) const { return values_.count(key) != 0; }

  std::string take_string(const std::string& key, const std::string& fallback) {
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    std::string v = it->second;
    values_.erase(it);
    if (v.empty()) throw ConfigError(source_ + ": " + key + " has an empty value");
    return v;
  }

  double take_double(const std::string& key, double fallback) {
    if (!has(key)) return fallback;
    return to_double(key, take_string(key, ""));
  }

  long take_long(const std::string& key, long fallback) {
    if (!has(key)) return fallback;
    const std::string v = take_string(key, "");
    std::size_t used = 0;
    long out = 0;
    try {
      out = std::stol(v, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != v.size()) throw ConfigError(source_ + ": " + key + " must be an integer, got '" + v + "'");
    return out;
  }

  int take_int(const std::string& key, int fallback) { return static_cast<int>(take_long(key, fallback)); }

  std::uint64_t take_u64(const std::string& key, std::uint64_t fallback) {
    if (!has(key)) return fallback;
    const std::string v = take_string(key, "");
    std::size_t used = 0;
    std::uint64_t out = 0;
    try {
      out = std::stoull(v, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != v.size() || v[0] == '-')
      throw ConfigError(source_ + ": " + key + " must be a non-negative integer, got '" + v + "'");
    return out;
  }

  bool take_bool(const std::string& key, bool fallback) {
    if (!has(key)) return fallback;
    const std::string v = take_string(key, "");
    if (v == "1" || v == "true") return true;
    if (v == "0" || v == "false") return false;
    throw ConfigError(source_ + ": " + key + " must be true/false, got '" + v + "'");
  }

  std::vector<double> take_list(const std::string& key, const std::vector<double>& fallback) {
    if (!has(key)) return fallback;
    const std::string v = take_string(key, "");
    std::vector<double> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(to_double(key, trim(item)));
    return out;
  }

  std::vector<std::string> take_words(const std::string& key, const std::vector<std::string>& fallback) {
    if (!has(key)) return fallback;
    const std::string v = take_string(key, "");
    std::vector<std::string> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(trim(item));
    return out;
  }

  /// Throws if any key was never taken.
  void finish() const {
    if (values_.empty()) return;
    std::string keys;
    for (const auto& [k, v] : values_) keys += (keys.empty() ? "" : ", ") + k;
    throw ConfigError(source_ + ": unknown keys: " + keys);
  }

 private:
  static std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  }

  double to_double(const std::string& key, const std::string& v) const {
    std::size_t used = 0;
    double out = 0.0;
    try {
      out = std::stod(v, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != v.size() || v.empty()) throw ConfigError(source_ + ": " + key + " must be a number, got '" + v + "'");
    return out;
  }

  std::string source_;
  std::map<std::string, std::string> values_;
};

namespace detail {

inline std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string num_list(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + num(v[i]);
  return s;
}

inline void take_csi(KeyValues& kv, CsiConfig& csi) {
  const std::string mode = kv.take_string("csi_mode", csi.imperfect ? "imperfect" : "perfect");
  if (mode != "perfect" && mode != "imperfect") throw ConfigError("csi_mode must be perfect or imperfect");
  csi.imperfect = mode == "imperfect";
  csi.estimation.sigma_e2 = kv.take_double("sigma_e2", csi.estimation.sigma_e2);
  csi.estimation.threshold = kv.take_double("threshold", csi.estimation.threshold);
  csi.n_q = kv.take_int("n_q", csi.n_q);
}

inline void take_channel(KeyValues& kv, ChannelDistribution& ch) {
  ch.mean = Complex(kv.take_double("channel_mean_re", ch.mean.real()), kv.take_double("channel_mean_im", ch.mean.imag()));
  ch.variance = kv.take_double("channel_variance", ch.variance);
}

inline void put_csi(std::ostringstream& o, const CsiConfig& csi) {
  o << "csi_mode=" << (csi.imperfect ? "imperfect" : "perfect") << '\n';
  o << "sigma_e2=" << num(csi.estimation.sigma_e2) << '\n';
  o << "threshold=" << num(csi.estimation.threshold) << '\n';
  o << "n_q=" << csi.n_q << '\n';
}

inline void put_channel(std::ostringstream& o, const ChannelDistribution& ch) {
  o << "channel_mean_re=" << num(ch.mean.real()) << '\n';
  o << "channel_mean_im=" << num(ch.mean.imag()) << '\n';
  o << "channel_variance=" << num(ch.variance) << '\n';
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Training configs

/// Reads every training key present, leaving others in `kv`.
inline TrainConfig take_train_config(KeyValues& kv, TrainConfig c = {}) {
  c.n_bits = kv.take_int("n_bits", c.n_bits);
  c.alpha_min = kv.take_double("alpha_min", c.alpha_min);
  c.alpha_max = kv.take_double("alpha_max", c.alpha_max);
  c.p_t = kv.take_double("p_t", c.p_t);
  c.train_snr_db = kv.take_double("train_snr_db", c.train_snr_db);
  c.n_channels = kv.take_long("n_channels", c.n_channels);
  c.epochs_per_channel = kv.take_int("epochs_per_channel", c.epochs_per_channel);
  c.batch = kv.take_int("batch", c.batch);
  c.lr = kv.take_double("lr", c.lr);
  c.decay = kv.take_double("decay", c.decay);
  c.decay_every = kv.take_long("decay_every", c.decay_every);
  c.seed = kv.take_u64("seed", c.seed);
  detail::take_csi(kv, c.csi);
  detail::take_channel(kv, c.channel);
  c.flags.use_shortcuts = kv.take_bool("use_shortcuts", c.flags.use_shortcuts);
  c.flags.alpha_to_subnet1 = kv.take_bool("alpha_to_subnet1", c.flags.alpha_to_subnet1);
  c.flags.alpha_to_subnet2 = kv.take_bool("alpha_to_subnet2", c.flags.alpha_to_subnet2);
  c.flags.alpha_to_rx = kv.take_bool("alpha_to_rx", c.flags.alpha_to_rx);
  c.flags.use_subnet2 = kv.take_bool("use_subnet2", c.flags.use_subnet2);
  c.shape.hidden = kv.take_int("hidden", c.shape.hidden);
  c.shape.depth = kv.take_int("depth", c.shape.depth);
  c.shape.power_hidden = kv.take_int("power_hidden", c.shape.power_hidden);
  return c;
}

inline TrainConfig parse_train_config(const std::string& text, const std::string& source = "config") {
  KeyValues kv = KeyValues::parse_string(text, source);
  TrainConfig c = take_train_config(kv);
  kv.finish();
  c.validate();
  return c;
}

inline TrainConfig load_train_config(const std::string& path) {
  KeyValues kv = KeyValues::load(path);
  TrainConfig c = take_train_config(kv);
  kv.finish();
  c.validate();
  return c;
}

/// Every field in a fixed order; re-parsing gives the same config.
inline std::string to_text(const TrainConfig& c) {
  std::ostringstream o;
  o << "n_bits=" << c.n_bits << '\n';
  o << "alpha_min=" << detail::num(c.alpha_min) << '\n';
  o << "alpha_max=" << detail::num(c.alpha_max) << '\n';
  o << "p_t=" << detail::num(c.p_t) << '\n';
  o << "train_snr_db=" << detail::num(c.train_snr_db) << '\n';
  o << "n_channels=" << c.n_channels << '\n';
  o << "epochs_per_channel=" << c.epochs_per_channel << '\n';
  o << "batch=" << c.batch << '\n';
  o << "lr=" << detail::num(c.lr) << '\n';
  o << "decay=" << detail::num(c.decay) << '\n';
  o << "decay_every=" << c.decay_every << '\n';
  o << "seed=" << c.seed << '\n';
  detail::put_csi(o, c.csi);
  detail::put_channel(o, c.channel);
  o << "use_shortcuts=" << c.flags.use_shortcuts << '\n';
  o << "alpha_to_subnet1=" << c.flags.alpha_to_subnet1 << '\n';
  o << "alpha_to_subnet2=" << c.flags.alpha_to_subnet2 << '\n';
  o << "alpha_to_rx=" << c.flags.alpha_to_rx << '\n';
  o << "use_subnet2=" << c.flags.use_subnet2 << '\n';
  o << "hidden=" << c.shape.hidden << '\n';
  o << "depth=" << c.shape.depth << '\n';
  o << "power_hidden=" << c.shape.power_hidden << '\n';
  return o.str();
}

inline std::string config_digest(const TrainConfig& c) { return sha256_hex(to_text(c)); }

// ---------------------------------------------------------------------------
// Evaluation configs

inline EvalConfig take_eval_config(KeyValues& kv, EvalConfig c = {}) {
  c.snr_grid_db = kv.take_list("snr_db", c.snr_grid_db);
  c.alpha_grid = kv.take_list("alpha", c.alpha_grid);
  c.n_channel_draws = kv.take_int("n_channel_draws", c.n_channel_draws);
  c.n_symbols_per_point = kv.take_long("n_symbols_per_point", c.n_symbols_per_point);
  c.seed = kv.take_u64("seed", c.seed);
  detail::take_csi(kv, c.csi);
  detail::take_channel(kv, c.channel);
  c.n_bits = kv.take_int("n_bits", c.n_bits);
  c.p_t = kv.take_double("p_t", c.p_t);
  c.rotation_steps = kv.take_int("rotation_steps", c.rotation_steps);
  c.threads = kv.take_int("threads", c.threads);
  c.min_errors = kv.take_long("min_errors", c.min_errors);
  c.max_bits = kv.take_long("max_bits", c.max_bits);
  c.adaptive_block = kv.take_long("adaptive_block", c.adaptive_block);
  return c;
}

inline std::string to_text(const EvalConfig& c) {
  std::ostringstream o;
  o << "snr_db=" << detail::num_list(c.snr_grid_db) << '\n';
  o << "alpha=" << detail::num_list(c.alpha_grid) << '\n';
  o << "n_channel_draws=" << c.n_channel_draws << '\n';
  o << "n_symbols_per_point=" << c.n_symbols_per_point << '\n';
  o << "seed=" << c.seed << '\n';
  detail::put_csi(o, c.csi);
  detail::put_channel(o, c.channel);
  o << "n_bits=" << c.n_bits << '\n';
  o << "p_t=" << detail::num(c.p_t) << '\n';
  o << "rotation_steps=" << c.rotation_steps << '\n';
  o << "min_errors=" << c.min_errors << '\n';
  o << "max_bits=" << c.max_bits << '\n';
  o << "adaptive_block=" << c.adaptive_block << '\n';
  return o.str();
}

// `threads` is left out of the digest: it never changes results.
inline std::string config_digest(const EvalConfig& c) { return sha256_hex(to_text(c)); }

}  // namespace zic
