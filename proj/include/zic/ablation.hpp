#pragma once

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <exception>
#include <memory>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include "zic/config.hpp"
#include "zic/daezic.hpp"
#include "zic/eval.hpp"

namespace zic {

/// Trains every architecture variant around each test alpha and compares
/// worst-case BER at one SNR.
struct AblationConfig {
  TrainConfig train{};
  EvalConfig eval{};
  std::vector<double> alphas{0.5, 1.0, 1.5};
  double half_width = 0.1;
  std::vector<int> experiments{0, 1, 2, 3, 4, 5, 6};
  int threads = 1;

  void validate() const {
    if (alphas.empty() || experiments.empty()) throw ConfigError("ablation needs alphas and experiments");
    if (!(half_width > 0.0)) throw ConfigError("ablation half_width must be > 0");
    if (threads < 1) throw ConfigError("threads must be >= 1");
    for (int k : experiments) AblationFlags::experiment(k);
    for (double a : alphas)
      if (!(a >= 0.0)) throw ConfigError("ablation alphas must be >= 0");
    train.validate();
    eval.validate();
  }
};

/// Training keys as for `train`, plus ablation_alphas, ablation_half_width,
/// eval_snr_db, eval_channel_draws, eval_symbols, eval_seed and threads.
inline AblationConfig take_ablation_config(KeyValues& kv) {
  AblationConfig c;
  c.train.n_channels = 500;
  c.train.batch = 1000;
  c.train = take_train_config(kv, c.train);
  c.alphas = kv.take_list("ablation_alphas", c.alphas);
  c.half_width = kv.take_double("ablation_half_width", c.half_width);
  c.eval.snr_grid_db = {kv.take_double("eval_snr_db", 10.0)};
  c.eval.n_channel_draws = kv.take_int("eval_channel_draws", 100);
  c.eval.n_symbols_per_point = kv.take_long("eval_symbols", 200000);
  c.eval.seed = kv.take_u64("eval_seed", c.train.seed);
  c.threads = kv.take_int("threads", c.threads);
  c.eval.n_bits = c.train.n_bits;
  c.eval.p_t = c.train.p_t;
  c.eval.csi = c.train.csi;
  c.eval.channel = c.train.channel;
  return c;
}

inline AblationConfig load_ablation_config(const std::string& path) {
  KeyValues kv = KeyValues::load(path);
  AblationConfig c = take_ablation_config(kv);
  kv.finish();
  c.validate();
  return c;
}

/// Training config of one variant around one alpha.
inline TrainConfig ablation_train_config(const AblationConfig& cfg, int experiment, double alpha) {
  TrainConfig t = cfg.train;
  t.flags = AblationFlags::experiment(experiment);
  t.alpha_min = std::max(0.0, alpha - cfg.half_width);
  t.alpha_max = alpha + cfg.half_width;
  return t;
}

struct AblationCell {
  int experiment = 0;
  double alpha = 0.0;
  BerPoint point;
};

/// Rows are alphas, columns experiments (in the configured order).
struct AblationTable {
  std::vector<double> alphas;
  std::vector<int> experiments;
  std::vector<AblationCell> cells;  // alpha-major

  const AblationCell& at(std::size_t alpha_index, std::size_t experiment_index) const {
    return cells[alpha_index * experiments.size() + experiment_index];
  }
};

/// Trains and evaluates one variant at one alpha.
inline AblationCell run_ablation_cell(const AblationConfig& cfg, int experiment, double alpha) {
  const TrainConfig t = ablation_train_config(cfg, experiment, alpha);
  ModelSet set;
  set.add(std::make_shared<DaeZicModel>(train(t)));
  EvalConfig e = cfg.eval;
  e.alpha_grid = {alpha};
  e.threads = 1;
  const BerResult r = evaluate_grid(e, e.scheme(SchemeKind::kDae, &set));
  return {experiment, alpha, r.points.front()};
}

inline AblationTable run_ablation(const AblationConfig& cfg) {
  cfg.validate();
  AblationTable table{cfg.alphas, cfg.experiments, {}};
  table.cells.resize(cfg.alphas.size() * cfg.experiments.size());
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr failure;
  auto worker = [&] {
    for (std::size_t k = next++; k < table.cells.size() && !failed; k = next++) {
      try {
        table.cells[k] = run_ablation_cell(cfg, cfg.experiments[k % cfg.experiments.size()],
                                           cfg.alphas[k / cfg.experiments.size()]);
      } catch (...) {
        if (!failed.exchange(true)) failure = std::current_exception();
      }
    }
  };
  const int n = std::min<int>(cfg.threads, static_cast<int>(table.cells.size()));
  if (n <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int t = 0; t < n; ++t) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);
  return table;
}

inline std::string experiment_name(int k) { return k == 0 ? "proposed" : "exp" + std::to_string(k); }

/// "alpha,proposed,exp1,...": worst-case BER per variant.
inline void write_ablation_csv(std::ostream& os, const AblationTable& t) {
  os << "alpha";
  for (int k : t.experiments) os << ',' << experiment_name(k);
  os << '\n';
  char buf[48];
  for (std::size_t a = 0; a < t.alphas.size(); ++a) {
    std::snprintf(buf, sizeof buf, "%.6g", t.alphas[a]);
    os << buf;
    for (std::size_t e = 0; e < t.experiments.size(); ++e) {
      std::snprintf(buf, sizeof buf, ",%.10g", t.at(a, e).point.ber_worst);
      os << buf;
    }
    os << '\n';
  }
}

}  // namespace zic
