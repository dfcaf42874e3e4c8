#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <memory>
#include <ostream>
#include <string>
#include <random>
#include <thread>
#include <tuple>
#include <vector>

#include "zic/channel.hpp"
#include "zic/daezic.hpp"
#include "zic/modem.hpp"

namespace zic {

enum class SchemeKind { kBaseline1, kBaseline2, kDae };

inline std::string scheme_name(SchemeKind k) {
  switch (k) {
    case SchemeKind::kBaseline1:
      return "baseline1";
    case SchemeKind::kBaseline2:
      return "baseline2";
    case SchemeKind::kDae:
      return "dae";
  }
  return "unknown";
}

inline SchemeKind parse_scheme(const std::string& s) {
  if (s == "baseline1") return SchemeKind::kBaseline1;
  if (s == "baseline2") return SchemeKind::kBaseline2;
  if (s == "dae") return SchemeKind::kDae;
  throw ConfigError("unknown scheme '" + s + "' (expected baseline1, baseline2 or dae)");
}

/// Trained models, one per alpha sub-interval. The evaluation routes each
/// test alpha to the model whose interval contains it.
class ModelSet {
 public:
  static constexpr double kAlphaLimit = 3.0;
  static constexpr double kIntervalWidth = 0.5;

  void add(std::shared_ptr<const DaeZicModel> m) { models_.push_back(std::move(m)); }
  bool empty() const { return models_.empty(); }
  std::size_t size() const { return models_.size(); }
  const std::vector<std::shared_ptr<const DaeZicModel>>& models() const { return models_; }

  const DaeZicModel& route(double alpha) const {
    if (!(alpha >= 0.0 && alpha <= kAlphaLimit))
      throw ConfigError("alpha=" + format(alpha) + " is outside [0, 3]; no DAE model can cover it");
    for (const auto& m : models_)
      if (m->covers(alpha)) return *m;
    const double lo = std::min(std::floor(alpha / kIntervalWidth) * kIntervalWidth, kAlphaLimit - kIntervalWidth);
    const double hi = lo + kIntervalWidth;
    throw ConfigError("no DAE model covers alpha=" + format(alpha) + " (missing interval [" + format(lo) + ", " +
                      format(hi) + (hi >= kAlphaLimit ? "])" : "))"));
  }

 private:
  static std::string format(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
  }

  std::vector<std::shared_ptr<const DaeZicModel>> models_;
};

/// A transmission scheme under test.
struct Scheme {
  SchemeKind kind = SchemeKind::kBaseline1;
  int n_bits = 2;
  double p_t = 1.0;
  int rotation_steps = 90;
  const ModelSet* models = nullptr;  // required for kDae

  std::string name() const { return scheme_name(kind); }
};

struct PointCounts {
  long errors1 = 0;
  long errors2 = 0;
  long symbols = 0;

  PointCounts& operator+=(const PointCounts& o) {
    errors1 += o.errors1;
    errors2 += o.errors2;
    symbols += o.symbols;
    return *this;
  }
};

/// Simulates one scheme on one fixed link.
class LinkSimulator {
 public:
  static constexpr long kBlock = 4096;

  LinkSimulator(const Scheme& scheme, const Link& link, double alpha_nominal) : scheme_(scheme), link_(link) {
    const Complex hbar21_rx1 = link.sqrt_alpha_rx1 * std::polar(1.0, link.theta_delta);
    switch (scheme.kind) {
      case SchemeKind::kBaseline1:
      case SchemeKind::kBaseline2: {
        c1_ = standard_qam(scheme.n_bits, scheme.p_t);
        c2_ = c1_;
        if (scheme.kind == SchemeKind::kBaseline2)
          c2_ = rotate(c1_, best_rotation(c1_, c1_, link.sqrt_alpha_tx, scheme.rotation_steps));
        // receivers assume unit direct gains; Rx1 also knows theta_delta
        rx1_ = std::make_unique<JointDetector>(c1_, c2_, hbar21_rx1);
        rx2_ = std::make_unique<PointDetector>(c2_);
        break;
      }
      case SchemeKind::kDae: {
        if (scheme.models == nullptr || scheme.models->empty()) throw ConfigError("DAE scheme needs trained models");
        model_ = &scheme.models->route(alpha_nominal);
        if (model_->n_bits() != scheme.n_bits) throw ConfigError("model n_bits does not match the evaluation");
        std::tie(c1_, c2_) = encode_constellation(*model_, link.sqrt_alpha_tx);
        side1_ = rx1_side(model_->spec(), link);
        side2_ = rx2_side(model_->spec(), link);
        break;
      }
    }
  }

  const Constellation& constellation1() const { return c1_; }
  const Constellation& constellation2() const { return c2_; }

  PointCounts run(long n_symbols, Rng& rng) const {
    PointCounts counts;
    const std::size_t m = std::size_t{1} << scheme_.n_bits;
    std::normal_distribution<double> nd1(0.0, std::sqrt(link_.channel.noise_var_rx1 / 2.0));
    std::normal_distribution<double> nd2(0.0, std::sqrt(link_.channel.noise_var_rx2 / 2.0));
    std::vector<std::size_t> l1, l2;
    std::vector<Complex> y1, y2;
    for (long done = 0; done < n_symbols; done += kBlock) {
      const long n = std::min(kBlock, n_symbols - done);
      l1.resize(static_cast<std::size_t>(n));
      l2.resize(static_cast<std::size_t>(n));
      y1.resize(static_cast<std::size_t>(n));
      y2.resize(static_cast<std::size_t>(n));
      for (long i = 0; i < n; ++i) {
        const auto word = rng();
        l1[i] = static_cast<std::size_t>(word % m);
        l2[i] = static_cast<std::size_t>((word >> 32) % m);
      }
      for (long i = 0; i < n; ++i) {
        const Complex n1(nd1(rng), nd1(rng));
        const Complex n2(nd2(rng), nd2(rng));
        const auto [a, b] = apply_channel_with_noise(link_.channel, c1_.points[l1[i]], c2_.points[l2[i]], n1, n2);
        y1[i] = a;
        y2[i] = b;
      }
      if (model_ == nullptr) {
        for (long i = 0; i < n; ++i) {
          counts.errors1 += bit_errors(l1[i], (*rx1_)(y1[i]));
          counts.errors2 += bit_errors(l2[i], (*rx2_)(y2[i]));
        }
      } else {
        Tensor2 t1(n, 2), t2(n, 2);
        for (long i = 0; i < n; ++i) {
          t1(i, 0) = y1[i].real();
          t1(i, 1) = y1[i].imag();
          t2(i, 0) = y2[i].real();
          t2(i, 1) = y2[i].imag();
        }
        const auto d1 = decode_labels(model_->rx1, t1, side1_);
        const auto d2 = decode_labels(model_->rx2, t2, side2_);
        for (long i = 0; i < n; ++i) {
          counts.errors1 += bit_errors(l1[i], d1[i]);
          counts.errors2 += bit_errors(l2[i], d2[i]);
        }
      }
      counts.symbols += n;
    }
    return counts;
  }

 private:
  Scheme scheme_;
  Link link_;
  Constellation c1_;
  Constellation c2_;
  std::unique_ptr<JointDetector> rx1_;
  std::unique_ptr<PointDetector> rx2_;
  const DaeZicModel* model_ = nullptr;
  ReceiverSideInfo side1_{};
  ReceiverSideInfo side2_{};
};

/// Sends n_symbols random symbol pairs over `link` and counts bit errors
/// per user. `alpha_nominal` selects the DAE model.
inline PointCounts run_point(const Scheme& scheme, const Link& link, double alpha_nominal, long n_symbols, Rng& rng) {
  return LinkSimulator(scheme, link, alpha_nominal).run(n_symbols, rng);
}

// ---------------------------------------------------------------------------

struct EvalConfig {
  std::vector<double> snr_grid_db{10.0};
  std::vector<double> alpha_grid{1.0};
  int n_channel_draws = 500;
  long n_symbols_per_point = 0;  // 0: adaptive stopping
  std::uint64_t seed = 1;
  CsiConfig csi{};
  ChannelDistribution channel{};
  int n_bits = 2;
  double p_t = 1.0;
  int rotation_steps = 90;
  int threads = 1;

  // adaptive stopping: at least this many errors on the worst user, or the
  // bit budget per user
  long min_errors = 100;
  long max_bits = 10'000'000;
  long adaptive_block = 1000;

  void validate() const {
    if (snr_grid_db.empty() || alpha_grid.empty()) throw ConfigError("snr and alpha grids must be non-empty");
    for (double a : alpha_grid)
      if (!(a >= 0.0)) throw ConfigError("alpha grid values must be >= 0");
    if (n_channel_draws < 1) throw ConfigError("n_channel_draws must be >= 1");
    if (n_symbols_per_point < 0) throw ConfigError("n_symbols_per_point must be >= 0");
    if (threads < 1) throw ConfigError("threads must be >= 1");
    if (min_errors < 1 || max_bits < 1 || adaptive_block < 1) throw ConfigError("invalid adaptive stopping settings");
    csi.validate();
    channel.validate();
  }

  Scheme scheme(SchemeKind kind, const ModelSet* models = nullptr) const {
    return Scheme{kind, n_bits, p_t, rotation_steps, models};
  }
};

struct BerPoint {
  std::string scheme;
  double snr_db = 0.0;
  double alpha = 0.0;
  double ber1 = 0.0;
  double ber2 = 0.0;
  double ber_worst = 0.0;
  long n_bits = 0;  // simulated per user
  long errors1 = 0;
  long errors2 = 0;

  /// Monte Carlo standard error of the worst-case BER.
  double std_error() const { return n_bits > 0 ? std::sqrt(ber_worst * (1.0 - ber_worst) / n_bits) : 0.0; }
};

inline BerPoint make_point(const std::string& scheme, double snr_db, double alpha, const PointCounts& c, int n_bits) {
  BerPoint p;
  p.scheme = scheme;
  p.snr_db = snr_db;
  p.alpha = alpha;
  p.n_bits = c.symbols * n_bits;
  p.errors1 = c.errors1;
  p.errors2 = c.errors2;
  p.ber1 = p.n_bits > 0 ? static_cast<double>(c.errors1) / static_cast<double>(p.n_bits) : 0.0;
  p.ber2 = p.n_bits > 0 ? static_cast<double>(c.errors2) / static_cast<double>(p.n_bits) : 0.0;
  p.ber_worst = std::max(p.ber1, p.ber2);
  return p;
}

struct BerResult {
  std::vector<BerPoint> points;
};

/// Averages one grid point over channel draws. Draw d of point (si, ai)
/// uses its own stream, so every scheme sees the same channels.
inline PointCounts evaluate_point(const EvalConfig& cfg, const Scheme& scheme, std::size_t si, std::size_t ai) {
  const double snr_db = cfg.snr_grid_db[si];
  const double alpha = cfg.alpha_grid[ai];
  const double noise_var = noise_var_from_snr(snr_db, cfg.p_t);
  std::vector<std::unique_ptr<LinkSimulator>> sims;
  auto simulator = [&](int d) -> const LinkSimulator& {
    if (sims.size() <= static_cast<std::size_t>(d)) sims.resize(static_cast<std::size_t>(d) + 1);
    auto& slot = sims[static_cast<std::size_t>(d)];
    if (!slot) {
      Rng link_rng = make_stream(cfg.seed, {kEvalStream, si, ai, static_cast<std::uint64_t>(d)});
      const Link link = draw_link(cfg.channel, cfg.csi, alpha, noise_var, FeedbackModel::kQuantized, link_rng);
      slot = std::make_unique<LinkSimulator>(scheme, link, alpha);
    }
    return *slot;
  };
  auto symbol_stream = [&](int d, std::uint64_t pass) {
    return make_stream(cfg.seed, {kEvalStream, si, ai, static_cast<std::uint64_t>(d), 1 + pass});
  };

  PointCounts total;
  if (cfg.n_symbols_per_point > 0) {
    const long per_draw = (cfg.n_symbols_per_point + cfg.n_channel_draws - 1) / cfg.n_channel_draws;
    for (int d = 0; d < cfg.n_channel_draws; ++d) {
      Rng rng = symbol_stream(d, 0);
      total += simulator(d).run(per_draw, rng);
      sims[static_cast<std::size_t>(d)].reset();
    }
    return total;
  }
  for (std::uint64_t pass = 0;; ++pass) {
    for (int d = 0; d < cfg.n_channel_draws; ++d) {
      Rng rng = symbol_stream(d, pass);
      total += simulator(d).run(cfg.adaptive_block, rng);
    }
    const long bits = total.symbols * cfg.n_bits;
    if (std::max(total.errors1, total.errors2) >= cfg.min_errors || bits >= cfg.max_bits) break;
  }
  return total;
}

/// Every (snr, alpha) combination of the grids, snr-major.
inline BerResult evaluate_grid(const EvalConfig& cfg, const Scheme& scheme) {
  cfg.validate();
  if (scheme.kind == SchemeKind::kDae) {
    if (scheme.models == nullptr) throw ConfigError("DAE scheme needs trained models");
    for (double a : cfg.alpha_grid) scheme.models->route(a);
  }
  const std::size_t ns = cfg.snr_grid_db.size();
  const std::size_t na = cfg.alpha_grid.size();
  std::vector<PointCounts> counts(ns * na);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::atomic<bool> failed{false};
  auto worker = [&] {
    for (std::size_t k = next++; k < counts.size() && !failed; k = next++) {
      try {
        counts[k] = evaluate_point(cfg, scheme, k / na, k % na);
      } catch (...) {
        if (!failed.exchange(true)) failure = std::current_exception();
      }
    }
  };
  const int n_threads = std::min<int>(cfg.threads, static_cast<int>(counts.size()));
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);

  BerResult out;
  for (std::size_t k = 0; k < counts.size(); ++k)
    out.points.push_back(
        make_point(scheme.name(), cfg.snr_grid_db[k / na], cfg.alpha_grid[k % na], counts[k], cfg.n_bits));
  return out;
}

/// BER versus SNR at a fixed interference gain.
inline BerResult sweep_snr(const EvalConfig& cfg, const Scheme& scheme, double alpha) {
  EvalConfig c = cfg;
  c.alpha_grid = {alpha};
  return evaluate_grid(c, scheme);
}

/// BER versus interference gain at a fixed SNR.
inline BerResult sweep_alpha(const EvalConfig& cfg, const Scheme& scheme, double snr_db) {
  EvalConfig c = cfg;
  c.snr_grid_db = {snr_db};
  return evaluate_grid(c, scheme);
}

/// Percentage reduction of the mean worst-case BER of `a` relative to `b`.
inline double compare_reduction(const BerResult& a, const BerResult& b) {
  if (a.points.size() != b.points.size() || a.points.empty()) throw ConfigError("BER grids do not match");
  double sa = 0.0;
  double sb = 0.0;
  for (std::size_t i = 0; i < a.points.size(); ++i) {
    if (a.points[i].snr_db != b.points[i].snr_db || a.points[i].alpha != b.points[i].alpha)
      throw ConfigError("BER grids do not match");
    sa += a.points[i].ber_worst;
    sb += b.points[i].ber_worst;
  }
  if (sb == 0.0) return 0.0;
  return 100.0 * (sb - sa) / sb;
}

inline void write_ber_csv_header(std::ostream& os) { os << "scheme,snr_db,alpha,ber1,ber2,ber_worst,stderr,n_bits\n"; }

inline void write_ber_csv_rows(std::ostream& os, const BerResult& r) {
  char buf[256];
  for (const auto& p : r.points) {
    std::snprintf(buf, sizeof buf, "%s,%.6g,%.6g,%.10g,%.10g,%.10g,%.10g,%ld\n", p.scheme.c_str(), p.snr_db, p.alpha,
                  p.ber1, p.ber2, p.ber_worst, p.std_error(), p.n_bits);
    os << buf;
  }
}

}  // namespace zic
