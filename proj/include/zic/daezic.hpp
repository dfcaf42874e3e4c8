#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "zic/channel.hpp"
#include "zic/modem.hpp"
#include "zic/nn/adam.hpp"
#include "zic/nn/layers.hpp"
#include "zic/nn/loss.hpp"

namespace zic {

using nn::Tensor2;

/// Architecture toggles of the ablation study. All true is the proposed
/// model.
struct AblationFlags {
  bool use_shortcuts = true;
  bool alpha_to_subnet1 = true;
  bool alpha_to_subnet2 = true;
  bool alpha_to_rx = true;
  bool use_subnet2 = true;

  /// Experiment 0 is the proposed model, 1..6 the ablation variants.
  static AblationFlags experiment(int k) {
    AblationFlags f;
    switch (k) {
      case 0:
        break;
      case 1:
        f.use_shortcuts = false;
        break;
      case 2:
        f.alpha_to_subnet1 = false;
        break;
      case 3:
        f.alpha_to_subnet2 = false;
        break;
      case 4:
        f.alpha_to_subnet1 = false;
        f.alpha_to_subnet2 = false;
        break;
      case 5:
        f.alpha_to_rx = false;
        break;
      case 6:
        f.alpha_to_subnet2 = false;
        f.use_subnet2 = false;
        break;
      default:
        throw ConfigError("ablation experiment must be in 0..6");
    }
    return f;
  }

  bool operator==(const AblationFlags&) const = default;
};

/// Hidden layer sizes. Transmitter sub-network 1 and the receivers use
/// `hidden` wide tanh layers with `depth` shortcut blocks; sub-network 2 uses
/// one `power_hidden` wide layer.
struct NetworkShape {
  int hidden = 64;
  int depth = 2;
  int power_hidden = 16;

  bool operator==(const NetworkShape&) const = default;
};

/// Everything needed to rebuild a model's architecture.
struct ModelSpec {
  int n_bits = 2;
  double p_t = 1.0;
  AblationFlags flags{};
  NetworkShape shape{};
  bool imperfect_csi = false;
  double alpha_min = 0.0;
  double alpha_max = 0.5;

  void validate() const {
    if (n_bits < 1 || n_bits > 8) throw ConfigError("n_bits must be in 1..8");
    if (!(p_t > 0.0)) throw ConfigError("p_t must be > 0");
    if (shape.hidden < 1 || shape.depth < 0 || shape.power_hidden < 1) throw ConfigError("invalid network shape");
    if (!(alpha_min >= 0.0) || !(alpha_min < alpha_max)) throw ConfigError("need 0 <= alpha_min < alpha_max");
  }

  /// Canonical text describing the architecture (hashed into model files).
  std::string architecture() const {
    std::string s = "zic-dae/v1";
    s += ";n_bits=" + std::to_string(n_bits);
    s += ";shortcuts=" + std::to_string(flags.use_shortcuts);
    s += ";a_sub1=" + std::to_string(flags.alpha_to_subnet1);
    s += ";a_sub2=" + std::to_string(flags.alpha_to_subnet2);
    s += ";a_rx=" + std::to_string(flags.alpha_to_rx);
    s += ";sub2=" + std::to_string(flags.use_subnet2);
    s += ";hidden=" + std::to_string(shape.hidden);
    s += ";depth=" + std::to_string(shape.depth);
    s += ";power_hidden=" + std::to_string(shape.power_hidden);
    s += ";imperfect=" + std::to_string(imperfect_csi);
    return s;
  }
};

/// Rows of all 2^n_bits bit patterns (MSB first), in label order.
inline Tensor2 all_bit_patterns(int n_bits) {
  const Eigen::Index m = Eigen::Index{1} << n_bits;
  Tensor2 bits(m, n_bits);
  for (Eigen::Index k = 0; k < m; ++k)
    for (int b = 0; b < n_bits; ++b) bits(k, b) = static_cast<double>((k >> (n_bits - 1 - b)) & 1);
  return bits;
}

// ---------------------------------------------------------------------------

/// Encoder: sub-network 1 shapes unit-power I/Q symbols, sub-network 2 sets
/// the I/Q power split gamma with |gamma|^2 = P_t. Output columns are
/// x_B^I * gamma^I and x_B^Q * gamma^Q, so the batch mean of |x|^2 is P_t.
class Transmitter {
 public:
  Transmitter() = default;
  Transmitter(int n_bits, double p_t, const AblationFlags& flags, const NetworkShape& shape, Rng& rng)
      : n_bits_(n_bits), p_t_(p_t), flags_(flags) {
    const int in_width = n_bits + (flags.alpha_to_subnet1 ? 1 : 0);
    input = nn::Dense(in_width, shape.hidden, nn::Activation::kTanh, rng);
    hidden = nn::HiddenStack(shape.hidden, shape.depth, flags.use_shortcuts, rng);
    output = nn::Dense(shape.hidden, 2, nn::Activation::kNone, rng);
    batch_norm = nn::BatchPowerNorm(2);
    if (flags.use_subnet2) {
      power_hidden = nn::Dense(1, shape.power_hidden, nn::Activation::kTanh, rng);
      power_out = nn::Dense(shape.power_hidden, 2, nn::Activation::kNone, rng);
    }
    power_norm = nn::PowerNorm(p_t);
  }

  int n_bits() const { return n_bits_; }
  double p_t() const { return p_t_; }
  const AblationFlags& flags() const { return flags_; }

  /// gamma for the given interference gain (inference, no caching).
  std::array<double, 2> power_split(double sqrt_alpha) const {
    const Tensor2 g = gamma_infer(sqrt_alpha);
    return {g(0, 0), g(0, 1)};
  }

  Tensor2 infer(const Tensor2& bits, double sqrt_alpha) const {
    Tensor2 f = output.infer(hidden.infer(input.infer(subnet1_input(bits, sqrt_alpha))));
    Tensor2 x = batch_norm.infer(f);
    const Tensor2 g = gamma_infer(sqrt_alpha);
    x.col(0) *= g(0, 0);
    x.col(1) *= g(0, 1);
    return x;
  }

  Tensor2 forward(const Tensor2& bits, double sqrt_alpha, bool training) {
    const Tensor2 f = output.forward(hidden.forward(input.forward(subnet1_input(bits, sqrt_alpha))));
    xb_ = batch_norm.forward(f, training);
    if (flags_.use_subnet2) {
      gamma_ = power_norm.forward(power_out.forward(power_hidden.forward(subnet2_input(sqrt_alpha))));
    } else {
      gamma_ = fixed_gamma();
    }
    Tensor2 x = xb_;
    x.col(0) *= gamma_(0, 0);
    x.col(1) *= gamma_(0, 1);
    return x;
  }

  void backward(const Tensor2& dx) {
    nn::require_shape(dx, xb_.rows(), 2, "transmitter gradient");
    Tensor2 dxb = dx;
    dxb.col(0) *= gamma_(0, 0);
    dxb.col(1) *= gamma_(0, 1);
    input.backward(hidden.backward(output.backward(batch_norm.backward(dxb))));
    if (flags_.use_subnet2) {
      Tensor2 dgamma(1, 2);
      dgamma(0, 0) = dx.col(0).dot(xb_.col(0));
      dgamma(0, 1) = dx.col(1).dot(xb_.col(1));
      power_hidden.backward(power_out.backward(power_norm.backward(dgamma)));
    }
  }

  void collect(std::vector<nn::Param*>& out) {
    auto add = [&](nn::Dense& d) {
      out.push_back(&d.weight);
      out.push_back(&d.bias);
    };
    add(input);
    for (auto& l : hidden.layers()) add(l);
    add(output);
    if (flags_.use_subnet2) {
      add(power_hidden);
      add(power_out);
    }
  }

  nn::Dense input;
  nn::HiddenStack hidden;
  nn::Dense output;
  nn::BatchPowerNorm batch_norm;
  nn::Dense power_hidden;
  nn::Dense power_out;
  nn::PowerNorm power_norm;

 private:
  Tensor2 subnet1_input(const Tensor2& bits, double sqrt_alpha) const {
    nn::require_shape(bits, -1, n_bits_, "transmitter bits");
    if (!flags_.alpha_to_subnet1) return bits;
    Tensor2 u(bits.rows(), n_bits_ + 1);
    u.leftCols(n_bits_) = bits;
    u.col(n_bits_).setConstant(sqrt_alpha);
    return u;
  }

  // Without alpha the branch sees a constant 1, so it still learns a fixed
  // split (a constant 0 would leave gamma0 = 0 at initialization).
  Tensor2 subnet2_input(double sqrt_alpha) const {
    Tensor2 a(1, 1);
    a(0, 0) = flags_.alpha_to_subnet2 ? sqrt_alpha : 1.0;
    return a;
  }

  Tensor2 fixed_gamma() const {
    Tensor2 g(1, 2);
    g.setConstant(std::sqrt(p_t_ / 2.0));
    return g;
  }

  Tensor2 gamma_infer(double sqrt_alpha) const {
    if (!flags_.use_subnet2) return fixed_gamma();
    return power_norm.infer(power_out.infer(power_hidden.infer(subnet2_input(sqrt_alpha))));
  }

  int n_bits_ = 0;
  double p_t_ = 1.0;
  AblationFlags flags_{};
  Tensor2 xb_;
  Tensor2 gamma_;
};

inline Tensor2 tx_forward(Transmitter& tx, const Tensor2& bits, double sqrt_alpha) {
  return tx.forward(bits, sqrt_alpha, true);
}

/// Side information fed to a receiver next to the received samples.
struct ReceiverSideInfo {
  double sqrt_alpha = 0.0;
  double eta = 1.0;
  double theta_delta = 0.0;
};

/// Desired-signal scaling applied after the receiver's batch normalization.
inline double desired_signal_scale(double p_desired, double noise_var) {
  return std::sqrt(1.0 + p_desired / noise_var);
}

/// Decoder: batch power normalization of the received I/Q, scaling by eta,
/// side information appended, then a tanh stack and a sigmoid output per
/// bit.
class Receiver {
 public:
  Receiver() = default;
  Receiver(int n_bits, bool takes_alpha, bool takes_theta, const AblationFlags& flags, const NetworkShape& shape,
           Rng& rng)
      : n_bits_(n_bits), takes_alpha_(takes_alpha), takes_theta_(takes_theta) {
    batch_norm = nn::BatchPowerNorm(2);
    input = nn::Dense(input_width(), shape.hidden, nn::Activation::kTanh, rng);
    hidden = nn::HiddenStack(shape.hidden, shape.depth, flags.use_shortcuts, rng);
    output = nn::Dense(shape.hidden, n_bits, nn::Activation::kNone, rng);
  }

  int input_width() const { return 2 + (takes_alpha_ ? 1 : 0) + (takes_theta_ ? 1 : 0); }
  bool takes_alpha() const { return takes_alpha_; }
  bool takes_theta() const { return takes_theta_; }

  /// Bit probabilities.
  Tensor2 infer(const Tensor2& y, const ReceiverSideInfo& side) const {
    return nn::sigmoid(output.infer(hidden.infer(input.infer(features(batch_norm.infer(y), side)))));
  }

  /// Pre-sigmoid outputs, caching activations for backward.
  Tensor2 forward_logits(const Tensor2& y, const ReceiverSideInfo& side, bool training) {
    eta_ = side.eta;
    return output.forward(hidden.forward(input.forward(features(batch_norm.forward(y, training), side))));
  }

  Tensor2 forward(const Tensor2& y, const ReceiverSideInfo& side, bool training) {
    return nn::sigmoid(forward_logits(y, side, training));
  }

  /// Takes dL/dlogits and returns dL/dy for the received samples.
  Tensor2 backward(const Tensor2& dlogits) {
    const Tensor2 du = input.backward(hidden.backward(output.backward(dlogits)));
    const Tensor2 dyb = eta_ * du.leftCols(2);
    return batch_norm.backward(dyb);
  }

  void collect(std::vector<nn::Param*>& out) {
    auto add = [&](nn::Dense& d) {
      out.push_back(&d.weight);
      out.push_back(&d.bias);
    };
    add(input);
    for (auto& l : hidden.layers()) add(l);
    add(output);
  }

  nn::BatchPowerNorm batch_norm;
  nn::Dense input;
  nn::HiddenStack hidden;
  nn::Dense output;

 private:
  Tensor2 features(const Tensor2& yb, const ReceiverSideInfo& side) const {
    nn::require_shape(yb, -1, 2, "receiver input");
    Tensor2 u(yb.rows(), input_width());
    u.leftCols(2) = side.eta * yb;
    int c = 2;
    if (takes_alpha_) u.col(c++).setConstant(side.sqrt_alpha);
    if (takes_theta_) u.col(c++).setConstant(side.theta_delta);
    return u;
  }

  int n_bits_ = 0;
  bool takes_alpha_ = true;
  bool takes_theta_ = false;
  double eta_ = 1.0;
};

inline Tensor2 rx_forward(Receiver& rx, const Tensor2& y, const ReceiverSideInfo& side) {
  return rx.forward(y, side, true);
}

// ---------------------------------------------------------------------------

/// Real 2x2 form [[re, -im], [im, re]] of a complex gain.
inline Eigen::Matrix2d real_form(Complex h) {
  Eigen::Matrix2d m;
  m << h.real(), -h.imag(), h.imag(), h.real();
  return m;
}

/// Non-trainable channel layers: one real 2x2 matrix per link.
struct ChannelLayers {
  Eigen::Matrix2d h11;
  Eigen::Matrix2d h21;
  Eigen::Matrix2d h22;

  explicit ChannelLayers(const EquivalentChannel& eq)
      : h11(real_form(eq.hbar11)), h21(real_form(eq.hbar21)), h22(real_form(eq.hbar22)) {}

  /// Noise-free received I/Q rows for both receivers.
  std::pair<Tensor2, Tensor2> apply(const Tensor2& x1, const Tensor2& x2) const {
    Tensor2 y1 = x1 * h11.transpose() + x2 * h21.transpose();
    Tensor2 y2 = x2 * h22.transpose();
    return {std::move(y1), std::move(y2)};
  }
};

/// The two transmitter/receiver autoencoder pairs.
class DaeZicModel {
 public:
  DaeZicModel() = default;
  DaeZicModel(const ModelSpec& spec, std::uint64_t seed) : spec_(spec) {
    spec.validate();
    Rng rng = make_stream(seed, {kInitStream});
    tx1 = Transmitter(spec.n_bits, spec.p_t, spec.flags, spec.shape, rng);
    tx2 = Transmitter(spec.n_bits, spec.p_t, spec.flags, spec.shape, rng);
    rx1 = Receiver(spec.n_bits, spec.flags.alpha_to_rx, spec.imperfect_csi, spec.flags, spec.shape, rng);
    rx2 = Receiver(spec.n_bits, spec.flags.alpha_to_rx, false, spec.flags, spec.shape, rng);
  }

  const ModelSpec& spec() const { return spec_; }
  int n_bits() const { return spec_.n_bits; }

  /// Half-open [alpha_min, alpha_max); an interval ending at 3 also
  /// includes its upper end.
  bool covers(double alpha) const {
    return alpha >= spec_.alpha_min && (alpha < spec_.alpha_max || (alpha == spec_.alpha_max && alpha >= 3.0));
  }

  std::vector<nn::Param*> params() {
    std::vector<nn::Param*> out;
    tx1.collect(out);
    tx2.collect(out);
    rx1.collect(out);
    rx2.collect(out);
    return out;
  }

  std::size_t parameter_count() {
    std::size_t n = 0;
    for (auto* p : params()) n += static_cast<std::size_t>(p->size());
    return n;
  }

  /// Non-trainable state, in serialization order.
  std::vector<nn::BatchPowerNorm*> norms() { return {&tx1.batch_norm, &tx2.batch_norm, &rx1.batch_norm, &rx2.batch_norm}; }

  void zero_grad() {
    for (auto* p : params()) p->zero_grad();
  }

  Transmitter tx1;
  Transmitter tx2;
  Receiver rx1;
  Receiver rx2;

 private:
  ModelSpec spec_{};
};

/// Side information for each receiver on a given link.
inline ReceiverSideInfo rx1_side(const ModelSpec& spec, const Link& link) {
  const double a = link.sqrt_alpha_rx1;
  return {a, desired_signal_scale((1.0 + a * a) * spec.p_t, link.channel.noise_var_rx1), link.theta_delta};
}

inline ReceiverSideInfo rx2_side(const ModelSpec& spec, const Link& link) {
  return {link.sqrt_alpha_tx, desired_signal_scale(spec.p_t, link.channel.noise_var_rx2), 0.0};
}

/// One training batch: bits of both users and the real noise samples added
/// at each receiver (N x 2, already scaled).
struct Batch {
  Tensor2 bits1;
  Tensor2 bits2;
  Tensor2 noise1;
  Tensor2 noise2;
};

struct StepLosses {
  double rx1 = 0.0;
  double rx2 = 0.0;
  double total() const { return rx1 + rx2; }
};

inline Batch draw_batch(int n_bits, int batch, const EquivalentChannel& eq, Rng& bit_rng, Rng& noise_rng) {
  Batch b;
  b.bits1.resize(batch, n_bits);
  b.bits2.resize(batch, n_bits);
  for (Eigen::Index i = 0; i < b.bits1.size(); ++i) {
    const auto word = bit_rng();
    b.bits1.data()[i] = static_cast<double>(word & 1U);
    b.bits2.data()[i] = static_cast<double>((word >> 1) & 1U);
  }
  b.noise1 = nn::gaussian_noise(Tensor2::Zero(batch, 2), eq.noise_var_rx1 / 2.0, noise_rng);
  b.noise2 = nn::gaussian_noise(Tensor2::Zero(batch, 2), eq.noise_var_rx2 / 2.0, noise_rng);
  return b;
}

/// Training-mode forward pass through both chains; returns L1 and L2.
/// With `backward` set, parameter gradients are zeroed and then filled:
/// L1 reaches Rx1, Tx1 and Tx2, L2 reaches Rx2 and Tx2.
inline StepLosses forward_backward(DaeZicModel& model, const Link& link, const Batch& batch, bool backward = true) {
  const ModelSpec& spec = model.spec();
  const ChannelLayers ch(link.channel);
  const Tensor2 x1 = model.tx1.forward(batch.bits1, link.sqrt_alpha_tx, true);
  const Tensor2 x2 = model.tx2.forward(batch.bits2, link.sqrt_alpha_tx, true);
  auto [y1, y2] = ch.apply(x1, x2);
  y1 += batch.noise1;
  y2 += batch.noise2;
  const Tensor2 z1 = model.rx1.forward_logits(y1, rx1_side(spec, link), true);
  const Tensor2 z2 = model.rx2.forward_logits(y2, rx2_side(spec, link), true);
  StepLosses losses{nn::bce_with_logits_loss(batch.bits1, z1), nn::bce_with_logits_loss(batch.bits2, z2)};
  if (!backward) return losses;

  model.zero_grad();
  const Tensor2 dy1 = model.rx1.backward(nn::bce_with_logits_grad(batch.bits1, z1));
  const Tensor2 dy2 = model.rx2.backward(nn::bce_with_logits_grad(batch.bits2, z2));
  const Tensor2 dx1 = dy1 * ch.h11;
  const Tensor2 dx2 = dy1 * ch.h21 + dy2 * ch.h22;
  model.tx1.backward(dx1);
  model.tx2.backward(dx2);
  return losses;
}

// ---------------------------------------------------------------------------
// Training

struct TrainConfig {
  int n_bits = 2;
  double alpha_min = 0.0;
  double alpha_max = 0.5;
  double p_t = 1.0;
  double train_snr_db = 10.0;
  long n_channels = 30000;
  int epochs_per_channel = 10;
  int batch = 10000;
  double lr = 1e-2;
  double decay = 0.95;
  long decay_every = 200;
  std::uint64_t seed = 1;
  CsiConfig csi{};
  ChannelDistribution channel{};
  AblationFlags flags{};
  NetworkShape shape{};

  void validate() const {
    model_spec().validate();
    if (n_channels < 0) throw ConfigError("n_channels must be >= 0");
    if (epochs_per_channel < 1 || batch < 2) throw ConfigError("epochs_per_channel >= 1 and batch >= 2 required");
    if (!(lr > 0.0) || !(decay > 0.0 && decay <= 1.0) || decay_every < 1)
      throw ConfigError("need lr > 0, 0 < decay <= 1, decay_every >= 1");
    csi.validate();
    channel.validate();
  }

  ModelSpec model_spec() const {
    ModelSpec s;
    s.n_bits = n_bits;
    s.p_t = p_t;
    s.flags = flags;
    s.shape = shape;
    s.imperfect_csi = csi.imperfect;
    s.alpha_min = alpha_min;
    s.alpha_max = alpha_max;
    return s;
  }
};

struct TrainLogRow {
  long channel = 0;
  double alpha = 0.0;
  double mean_loss = 0.0;
  double lr = 0.0;
};

using TrainObserver = std::function<void(const TrainLogRow&)>;

/// Draws the link for one training channel (perfect or imperfect CSI).
inline Link training_link(const TrainConfig& cfg, double alpha, Rng& rng) {
  const double noise_var = noise_var_from_snr(cfg.train_snr_db, cfg.p_t);
  return draw_link(cfg.channel, cfg.csi, alpha, noise_var, FeedbackModel::kSimulated, rng);
}

/// Trains a fresh model: for every channel a random alpha in the configured
/// interval, a channel draw, then `epochs_per_channel` Adam steps on random
/// bits; the learning rate drops every `decay_every` channels.
inline DaeZicModel train(const TrainConfig& cfg, const TrainObserver& observer = {}) {
  cfg.validate();
  DaeZicModel model(cfg.model_spec(), cfg.seed);
  nn::Adam opt(nn::AdamOptions{cfg.lr, cfg.decay});
  const std::vector<nn::Param*> params = model.params();
  Rng channel_rng = make_stream(cfg.seed, {kChannelStream});
  for (long c = 0; c < cfg.n_channels; ++c) {
    const double alpha = uniform(channel_rng, cfg.alpha_min, cfg.alpha_max);
    const Link link = training_link(cfg, alpha, channel_rng);
    Rng bit_rng = make_stream(cfg.seed, {kBitStream, static_cast<std::uint64_t>(c)});
    Rng noise_rng = make_stream(cfg.seed, {kNoiseStream, static_cast<std::uint64_t>(c)});
    double loss_sum = 0.0;
    for (int e = 0; e < cfg.epochs_per_channel; ++e) {
      const Batch batch = draw_batch(cfg.n_bits, cfg.batch, link.channel, bit_rng, noise_rng);
      const StepLosses losses = forward_backward(model, link, batch);
      if (!std::isfinite(losses.total())) {
        throw TrainingDiverged("non-finite loss at channel " + std::to_string(c) + ", epoch " + std::to_string(e) +
                               " (alpha=" + std::to_string(alpha) + ", lr=" + std::to_string(opt.learning_rate()) +
                               ")");
      }
      loss_sum += losses.total();
      opt.step(params);
    }
    if (observer) observer({c, alpha, loss_sum / cfg.epochs_per_channel, opt.learning_rate()});
    if ((c + 1) % cfg.decay_every == 0) opt.decay_learning_rate();
  }
  return model;
}

/// The learned constellations of both transmitters at the given gain, using
/// the frozen (running) normalization statistics.
inline std::pair<Constellation, Constellation> encode_constellation(const DaeZicModel& model, double sqrt_alpha) {
  const int n = model.n_bits();
  const Tensor2 bits = all_bit_patterns(n);
  auto to_constellation = [&](const Transmitter& tx) {
    const Tensor2 x = tx.infer(bits, sqrt_alpha);
    std::vector<Complex> pts(static_cast<std::size_t>(x.rows()));
    for (Eigen::Index k = 0; k < x.rows(); ++k) pts[static_cast<std::size_t>(k)] = Complex(x(k, 0), x(k, 1));
    return make_constellation(std::move(pts), n);
  };
  return {to_constellation(model.tx1), to_constellation(model.tx2)};
}

/// Hard bit decisions (probability > 0.5) of a frozen receiver, packed as
/// labels.
inline std::vector<std::size_t> decode_labels(const Receiver& rx, const Tensor2& y, const ReceiverSideInfo& side) {
  const Tensor2 p = rx.infer(y, side);
  std::vector<std::size_t> labels(static_cast<std::size_t>(p.rows()));
  for (Eigen::Index r = 0; r < p.rows(); ++r) {
    std::size_t l = 0;
    for (Eigen::Index b = 0; b < p.cols(); ++b) l = (l << 1) | (p(r, b) > 0.5 ? 1U : 0U);
    labels[static_cast<std::size_t>(r)] = l;
  }
  return labels;
}

}  // namespace zic
