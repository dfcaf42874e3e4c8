#pragma once

#include <CLI11.hpp>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "zic/ablation.hpp"
#include "zic/config.hpp"
#include "zic/daezic.hpp"
#include "zic/eval.hpp"
#include "zic/gradcheck.hpp"
#include "zic/manifest.hpp"
#include "zic/model_io.hpp"
#include "zic/quantizer.hpp"

namespace zic::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

/// ZIC_LOG: 0/quiet, 1/info (default), 2/debug.
inline int log_level() {
  const char* v = std::getenv("ZIC_LOG");
  if (v == nullptr) return 1;
  const std::string s = v;
  if (s == "0" || s == "quiet" || s == "error") return 0;
  if (s == "2" || s == "debug") return 2;
  return 1;
}

class Logger {
 public:
  explicit Logger(std::ostream& os) : os_(os), level_(log_level()) {}
  void info(const std::string& msg) const {
    if (level_ >= 1) os_ << "[zic] " << msg << '\n';
  }
  void debug(const std::string& msg) const {
    if (level_ >= 2) os_ << "[zic] " << msg << '\n';
  }

 private:
  std::ostream& os_;
  int level_;
};

/// Writes `text` to `path`, replacing any existing file.
inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path);
  out << text;
  if (!out) throw Error("failed writing " + path);
}

struct Context {
  std::vector<std::string> argv;
  std::ostream& out;
  std::ostream& err;
};

inline bool require_file(const std::string& path, const std::string& what, std::ostream& err) {
  if (path.empty() || !std::filesystem::is_regular_file(path)) {
    err << "error: " << what << " '" << path << "' does not exist\n";
    return false;
  }
  return true;
}

// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
};

inline int cmd_train(const TrainArgs& a, const Context& ctx) {
  if (!require_file(a.config, "config file", ctx.err)) return kExitUsage;
  const Logger log(ctx.err);
  RunManifest m;
  m.command = "train";
  m.argv = ctx.argv;
  m.started_utc = utc_now();
  TrainConfig cfg = load_train_config(a.config);
  if (a.seed) cfg.seed = *a.seed;
  cfg.validate();
  m.consume(a.config);
  m.config_digest = config_digest(cfg);
  m.seed = cfg.seed;

  const std::string log_path = a.out + ".train.csv";
  std::ostringstream csv;
  csv << "channel,alpha,mean_loss,lr\n";
  log.info("training " + std::to_string(cfg.n_channels) + " channels, alpha in [" + detail::num(cfg.alpha_min) +
           ", " + detail::num(cfg.alpha_max) + "), seed " + std::to_string(cfg.seed));
  DaeZicModel model = train(cfg, [&](const TrainLogRow& r) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "%ld,%.10g,%.10g,%.10g\n", r.channel, r.alpha, r.mean_loss, r.lr);
    csv << buf;
    const bool milestone = (r.channel + 1) % std::max<long>(1, cfg.n_channels / 10) == 0;
    const std::string line = "channel " + std::to_string(r.channel + 1) + "/" + std::to_string(cfg.n_channels) +
                             " loss " + detail::num(r.mean_loss);
    if (milestone) {
      log.info(line);
    } else {
      log.debug(line);
    }
  });
  save_model(a.out, model, {m.config_digest, manifest_name(a.out)});
  write_text(log_path, csv.str());
  m.produce(a.out);
  m.produce(log_path);
  m.finished_utc = utc_now();
  m.write(manifest_path(a.out));
  log.info("wrote " + a.out);
  return kExitOk;
}

// ---------------------------------------------------------------------------

/// Every "*.model" file in `dir`, sorted by name.
inline std::vector<std::string> model_files(const std::string& dir) {
  if (!std::filesystem::is_directory(dir)) throw ConfigError("model directory '" + dir + "' does not exist");
  std::vector<std::string> out;
  for (const auto& e : std::filesystem::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".model") out.push_back(e.path().string());
  std::sort(out.begin(), out.end());
  return out;
}

struct EvalArgs {
  std::string config;
  std::vector<std::string> schemes{"baseline1"};
  std::string model_dir;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
};

inline int cmd_eval(const EvalArgs& a, const Context& ctx) {
  if (!require_file(a.config, "config file", ctx.err)) return kExitUsage;
  const Logger log(ctx.err);
  RunManifest m;
  m.command = "eval";
  m.argv = ctx.argv;
  m.started_utc = utc_now();
  KeyValues kv = KeyValues::load(a.config);
  EvalConfig cfg = take_eval_config(kv);
  kv.finish();
  if (a.seed) cfg.seed = *a.seed;
  if (a.threads) cfg.threads = *a.threads;
  cfg.validate();
  m.consume(a.config);
  m.config_digest = config_digest(cfg);
  m.seed = cfg.seed;

  std::vector<SchemeKind> kinds;
  for (const auto& s : a.schemes) kinds.push_back(parse_scheme(s));
  ModelSet models;
  if (std::find(kinds.begin(), kinds.end(), SchemeKind::kDae) != kinds.end()) {
    if (a.model_dir.empty()) throw ConfigError("scheme dae needs --model-dir");
    for (const auto& path : model_files(a.model_dir)) {
      auto loaded = load_model(path);
      models.add(std::make_shared<DaeZicModel>(std::move(loaded.model)));
      m.consume(path);
      log.debug("loaded " + path);
    }
  }

  std::ostringstream csv;
  write_ber_csv_header(csv);
  for (const auto kind : kinds) {
    log.info("evaluating " + scheme_name(kind));
    write_ber_csv_rows(csv, evaluate_grid(cfg, cfg.scheme(kind, &models)));
  }
  write_text(a.out, csv.str());
  m.produce(a.out);
  m.finished_utc = utc_now();
  m.write(manifest_path(a.out));
  log.info("wrote " + a.out);
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct ExportArgs {
  std::string model;
  double alpha = 0.0;
  std::string out;
};

/// "user,bits,re,im" for both learned constellations.
inline std::string constellation_csv(const Constellation& c1, const Constellation& c2) {
  std::ostringstream os;
  os << "user,bits,re,im\n";
  write_constellation_rows(os, c1, "1,");
  write_constellation_rows(os, c2, "2,");
  return os.str();
}

inline int cmd_export_constellation(const ExportArgs& a, const Context& ctx) {
  if (!require_file(a.model, "model file", ctx.err)) return kExitUsage;
  RunManifest m;
  m.command = "export-constellation";
  m.argv = ctx.argv;
  m.started_utc = utc_now();
  const LoadedModel loaded = load_model(a.model);
  m.consume(a.model);
  m.config_digest = loaded.info.config_digest;
  const ModelSpec& s = loaded.model.spec();
  if (!loaded.model.covers(a.alpha))
    throw ConfigError("alpha=" + detail::num(a.alpha) + " is outside the model's interval [" +
                      detail::num(s.alpha_min) + ", " + detail::num(s.alpha_max) + ")");
  const auto [c1, c2] = encode_constellation(loaded.model, std::sqrt(a.alpha));
  write_text(a.out, constellation_csv(c1, c2));
  m.produce(a.out);
  m.finished_utc = utc_now();
  m.write(manifest_path(a.out));
  Logger(ctx.err).info("wrote " + a.out);
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct AblationArgs {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
};

inline int cmd_ablation(const AblationArgs& a, const Context& ctx) {
  if (!require_file(a.config, "config file", ctx.err)) return kExitUsage;
  const Logger log(ctx.err);
  RunManifest m;
  m.command = "ablation";
  m.argv = ctx.argv;
  m.started_utc = utc_now();
  AblationConfig cfg = load_ablation_config(a.config);
  if (a.seed) {
    cfg.train.seed = *a.seed;
    cfg.eval.seed = *a.seed;
  }
  if (a.threads) cfg.threads = *a.threads;
  cfg.validate();
  m.consume(a.config);
  m.config_digest = sha256_hex(to_text(cfg.train) + to_text(cfg.eval));
  m.seed = cfg.train.seed;
  log.info("ablation: " + std::to_string(cfg.experiments.size() * cfg.alphas.size()) + " training runs");
  const AblationTable table = run_ablation(cfg);
  std::ostringstream csv;
  write_ablation_csv(csv, table);
  write_text(a.out, csv.str());
  m.produce(a.out);
  m.finished_utc = utc_now();
  m.write(manifest_path(a.out));
  log.info("wrote " + a.out);
  return kExitOk;
}

// ---------------------------------------------------------------------------

/// Fast property checks; prints one PASS/FAIL line each and returns the
/// number of failures.
inline int run_selftest(std::ostream& os) {
  int failures = 0;
  auto report = [&](const std::string& name, bool ok) {
    os << (ok ? "PASS " : "FAIL ") << name << '\n';
    if (!ok) ++failures;
  };
  auto guarded = [&](const std::string& name, const std::function<bool()>& check) {
    try {
      report(name, check());
    } catch (const std::exception& e) {
      os << "FAIL " << name << " (" << e.what() << ")\n";
      ++failures;
    }
  };

  guarded("quantizer midpoint and idempotence", [] {
    Rng rng = make_stream(7, {1});
    for (int n = 1; n <= 8; ++n) {
      const Quantizer q = angle_quantizer(n);
      for (int i = 0; i < 2000; ++i) {
        const double v = uniform(rng, -kPi, kPi);
        const double qv = q(v);
        if (std::abs(qv - v) > q.step() / 2.0 + 1e-12 || q(qv) != qv) return false;
      }
    }
    return true;
  });

  guarded("transmitter power constraint", [] {
    ModelSpec spec;
    DaeZicModel model(spec, 3);
    Rng rng = make_stream(7, {2});
    for (int i = 0; i < 20; ++i) {
      Tensor2 bits(64, spec.n_bits);
      for (Eigen::Index k = 0; k < bits.size(); ++k) bits.data()[k] = static_cast<double>(rng() & 1U);
      const double sa = std::sqrt(uniform(rng, 0.0, 3.0));
      const Tensor2 x = model.tx1.forward(bits, sa, true);
      if (std::abs(x.squaredNorm() / 64.0 - spec.p_t) > 1e-9) return false;
      const auto g = model.tx2.power_split(sa);
      if (std::abs(g[0] * g[0] + g[1] * g[1] - spec.p_t) > 1e-12) return false;
    }
    return true;
  });

  guarded("original and equivalent channel models agree", [] {
    Rng rng = make_stream(7, {3});
    const ChannelDistribution dist;
    for (int i = 0; i < 1000; ++i) {
      ChannelRealization ch = draw_channel(dist, rng);
      ch.h21 = draw_interference(uniform(rng, 0.0, 3.0), rng);
      const EquivalentChannel eq = normalize_perfect(ch, 0.1);
      const Complex x1 = complex_gaussian(rng, {}, 1.0);
      const Complex x2 = complex_gaussian(rng, {}, 1.0);
      const Complex n1 = complex_gaussian(rng, {}, 0.1);
      const Complex n2 = complex_gaussian(rng, {}, 0.1);
      const auto [a1, a2] = receive_original(ch, x1, x2, n1, n2);
      const auto [en1, en2] = equivalent_noise(ch, n1, n2);
      const auto [b1, b2] = apply_channel_with_noise(eq, x1, x2, en1, en2);
      if (std::abs(a1 - b1) > 1e-10 || std::abs(a2 - b2) > 1e-10) return false;
    }
    return true;
  });

  guarded("rotation separates the composite constellation", [] {
    const Constellation c = standard_qam(2, 1.0);
    const double theta = best_rotation(c, c, 1.0, 90);
    return composite_min_distance(c, c, 1.0) < 1e-12 && composite_min_distance(c, rotate(c, theta), 1.0) > 1e-3;
  });

  guarded("end-to-end gradients", [] {
    ModelSpec spec;
    spec.shape = {6, 2, 4};
    DaeZicModel model(spec, 11);
    const Link link = perfect_link(0.8, 0.1);
    Rng bits = make_stream(7, {4});
    Rng noise = make_stream(7, {5});
    Batch batch = draw_batch(spec.n_bits, 12, link.channel, bits, noise);
    batch.noise1.setZero();
    batch.noise2.setZero();
    return check_gradients(model, link, batch).max_rel_error < 1e-4;
  });

  guarded("model file round trip", [] {
    ModelSpec spec;
    spec.shape = {8, 1, 4};
    DaeZicModel model(spec, 5);
    const std::string bytes = serialize_model(model);
    LoadedModel loaded = deserialize_model(bytes);
    return serialize_model(loaded.model) == bytes;
  });

  return failures;
}

// ---------------------------------------------------------------------------

/// Parses arguments and dispatches; returns the process exit status.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Deep autoencoder transceivers for the two-user Z-interference channel"};
  app.require_subcommand(1);

  TrainArgs train_args;
  auto* train_cmd = app.add_subcommand("train", "train one model from a key=value config");
  train_cmd->add_option("--config", train_args.config, "training config file")->required();
  train_cmd->add_option("--out", train_args.out, "output model path")->required();
  train_cmd->add_option("--seed", train_args.seed, "override the config seed");

  EvalArgs eval_args;
  auto* eval_cmd = app.add_subcommand("eval", "Monte Carlo BER over an SNR x alpha grid");
  eval_cmd->add_option("--config", eval_args.config, "evaluation config file")->required();
  eval_cmd->add_option("--scheme", eval_args.schemes, "baseline1, baseline2, dae (comma separated)")
      ->delimiter(',');
  eval_cmd->add_option("--model-dir", eval_args.model_dir, "directory of *.model files for scheme dae");
  eval_cmd->add_option("--out", eval_args.out, "output CSV")->required();
  eval_cmd->add_option("--seed", eval_args.seed, "override the config seed");
  eval_cmd->add_option("--threads", eval_args.threads, "worker threads");

  ExportArgs export_args;
  auto* export_cmd = app.add_subcommand("export-constellation", "write both learned constellations as CSV");
  export_cmd->add_option("--model", export_args.model, "model file")->required();
  export_cmd->add_option("--alpha", export_args.alpha, "interference gain")->required();
  export_cmd->add_option("--out", export_args.out, "output CSV")->required();

  AblationArgs ablation_args;
  auto* ablation_cmd = app.add_subcommand("ablation", "train and compare the architecture variants");
  ablation_cmd->add_option("--config", ablation_args.config, "ablation config file")->required();
  ablation_cmd->add_option("--out", ablation_args.out, "output CSV")->required();
  ablation_cmd->add_option("--seed", ablation_args.seed, "override the config seed");
  ablation_cmd->add_option("--threads", ablation_args.threads, "concurrent training runs");

  auto* selftest_cmd = app.add_subcommand("selftest", "run the fast property checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }

  const Context ctx{std::vector<std::string>(argv, argv + argc), out, err};
  try {
    if (train_cmd->parsed()) return cmd_train(train_args, ctx);
    if (eval_cmd->parsed()) return cmd_eval(eval_args, ctx);
    if (export_cmd->parsed()) return cmd_export_constellation(export_args, ctx);
    if (ablation_cmd->parsed()) return cmd_ablation(ablation_args, ctx);
    if (selftest_cmd->parsed()) return run_selftest(out) == 0 ? kExitOk : kExitFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace zic::cli
