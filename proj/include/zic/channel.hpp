#pragma once

#include <cmath>
#include <optional>
#include <utility>

#include "zic/core.hpp"
#include "zic/quantizer.hpp"
#include "zic/random.hpp"

namespace zic {

/// Distribution of the raw channel gains, CN(mean, variance).
struct ChannelDistribution {
  Complex mean{1.0, 0.0};
  double variance = 0.1;

  void validate() const {
    if (!(variance >= 0.0) || !std::isfinite(variance)) throw ConfigError("channel variance must be >= 0");
  }
};

/// Raw complex gains of the Z-channel. There is no Tx1->Rx2 link.
struct ChannelRealization {
  Complex h11{1.0, 0.0};
  Complex h21{0.0, 0.0};
  Complex h22{1.0, 0.0};
};

/// Normalized coefficients seen after pre/post-processing. This is what
/// every transceiver actually simulates.
struct EquivalentChannel {
  Complex hbar11{1.0, 0.0};
  Complex hbar21{0.0, 0.0};
  Complex hbar22{1.0, 0.0};
  double sqrt_alpha = 0.0;
  double noise_var_rx1 = 1.0;
  double noise_var_rx2 = 1.0;
};

struct EstimationConfig {
  double sigma_e2 = 0.0;
  double threshold = 1.0;

  void validate() const {
    if (!(sigma_e2 >= 0.0)) throw ConfigError("estimation error variance must be >= 0");
    if (!(threshold > 0.0)) throw ConfigError("acceptance threshold must be > 0");
  }
};

struct EstimationError {
  Complex eps11{};
  Complex eps21{};
  Complex eps22{};
};

struct EstimatedChannel {
  Complex hhat11{}, hhat21{}, hhat22{};
  Complex eps11{}, eps21{}, eps22{};
  double alpha_hat = 0.0;
  double theta_hat = 0.0;  // wrapped into [-pi, pi)
};

struct FeedbackMessage {
  double alpha_q = 0.0;
  double theta_q = 0.0;
  double theta_delta = 0.0;  // theta_q - theta_hat, known only at Rx1
};

/// CSI model used by training and evaluation. `n_q == 0` means the feedback
/// is not quantized.
struct CsiConfig {
  bool imperfect = false;
  EstimationConfig estimation{};
  int n_q = 0;

  void validate() const {
    estimation.validate();
    if (n_q < 0 || n_q > 52) throw ConfigError("n_q must be in 0..52 (0 disables quantization)");
  }
};

// ---------------------------------------------------------------------------
// Channel draws

/// Draws h11 and h22 from `dist`; h21 is left at zero (see draw_interference).
inline ChannelRealization draw_channel(const ChannelDistribution& dist, Rng& rng) {
  ChannelRealization ch;
  ch.h11 = complex_gaussian(rng, dist.mean, dist.variance);
  ch.h22 = complex_gaussian(rng, dist.mean, dist.variance);
  ch.h21 = Complex{};
  return ch;
}

/// sqrt(alpha) * e^{j theta}, theta uniform on [0, 2pi).
inline Complex draw_interference(double alpha, Rng& rng) {
  if (!(alpha >= 0.0)) throw ConfigError("interference gain alpha must be >= 0");
  const double theta = uniform(rng, 0.0, 2.0 * kPi);
  if (alpha == 0.0) return Complex{};
  return std::polar(std::sqrt(alpha), theta);
}

// ---------------------------------------------------------------------------
// Perfect CSI

inline EquivalentChannel normalize_perfect(const ChannelRealization& ch, double noise_var) {
  const double r11 = std::abs(ch.h11);
  const double r22 = std::abs(ch.h22);
  if (!(r11 > 0.0) || !(r22 > 0.0)) throw DegenerateChannel("direct channel gain is zero");
  EquivalentChannel eq;
  eq.sqrt_alpha = std::abs(ch.h21) / r11;
  eq.hbar11 = Complex(1.0, 0.0);
  eq.hbar22 = Complex(1.0, 0.0);
  eq.hbar21 = Complex(eq.sqrt_alpha, 0.0);
  eq.noise_var_rx1 = noise_var / std::norm(ch.h11);
  eq.noise_var_rx2 = noise_var / std::norm(ch.h22);
  return eq;
}

/// Unit direct gains, real cross gain sqrt(alpha), noise `noise_var` at both
/// receivers.
inline EquivalentChannel unit_channel(double alpha, double noise_var) {
  if (!(alpha >= 0.0)) throw ConfigError("interference gain alpha must be >= 0");
  EquivalentChannel eq;
  eq.sqrt_alpha = std::sqrt(alpha);
  eq.hbar21 = Complex(eq.sqrt_alpha, 0.0);
  eq.noise_var_rx1 = noise_var;
  eq.noise_var_rx2 = noise_var;
  return eq;
}

/// Received samples of the unnormalized link with explicit processing:
/// Tx2 pre-rotates by e^{j(theta11 - theta21)}, Rx1 divides by h11 and Rx2
/// applies h22^{-1} e^{j(theta21 - theta11)}. Noise is passed in so the
/// result can be compared against the equivalent model.
inline std::pair<Complex, Complex> receive_original(const ChannelRealization& ch, Complex x1, Complex x2,
                                                    Complex n1, Complex n2) {
  const double th11 = std::arg(ch.h11);
  const double th21 = std::arg(ch.h21);
  const Complex pre = std::polar(1.0, th11 - th21);
  const Complex x2_tx = pre * x2;
  const Complex y1 = ch.h11 * x1 + ch.h21 * x2_tx + n1;
  const Complex y2 = ch.h22 * x2_tx + n2;
  return {y1 / ch.h11, std::polar(1.0, th21 - th11) * y2 / ch.h22};
}

/// Noise of the equivalent model that corresponds to raw receiver noise
/// (n1, n2) under the processing of receive_original.
inline std::pair<Complex, Complex> equivalent_noise(const ChannelRealization& ch, Complex n1, Complex n2) {
  const double th11 = std::arg(ch.h11);
  const double th21 = std::arg(ch.h21);
  return {n1 / ch.h11, std::polar(1.0, th21 - th11) * n2 / ch.h22};
}

// ---------------------------------------------------------------------------
// Imperfect CSI

/// Estimate from a forced error draw: hhat = h - eps.
inline EstimatedChannel estimate_with(const ChannelRealization& ch, const EstimationError& err) {
  EstimatedChannel est;
  est.eps11 = err.eps11;
  est.eps21 = err.eps21;
  est.eps22 = err.eps22;
  est.hhat11 = ch.h11 - err.eps11;
  est.hhat21 = ch.h21 - err.eps21;
  est.hhat22 = ch.h22 - err.eps22;
  const double r11 = std::abs(est.hhat11);
  const double ratio = std::abs(est.hhat21) / r11;
  est.alpha_hat = ratio * ratio;
  est.theta_hat = wrap_angle(std::arg(est.hhat11) - std::arg(est.hhat21));
  return est;
}

inline EstimatedChannel estimate(const ChannelRealization& ch, const EstimationConfig& cfg, Rng& rng) {
  cfg.validate();
  EstimationError err;
  err.eps11 = complex_gaussian(rng, Complex{}, cfg.sigma_e2);
  err.eps21 = complex_gaussian(rng, Complex{}, cfg.sigma_e2);
  err.eps22 = complex_gaussian(rng, Complex{}, cfg.sigma_e2);
  return estimate_with(ch, err);
}

/// Keeps a channel only if no estimation error dominates its estimate.
inline bool accept_channel(const EstimatedChannel& est, const EstimationConfig& cfg) {
  const double r11 = std::abs(est.eps11) / std::abs(est.hhat11);
  const double r22 = std::abs(est.eps22) / std::abs(est.hhat22);
  const double r21 = std::abs(est.eps21) / std::abs(est.hhat11);
  // 0/0 only happens for an exact zero estimate with zero error
  auto ok = [&](double r) { return !std::isnan(r) && r < cfg.threshold; };
  return ok(r11) && ok(r22) && ok(r21);
}

inline FeedbackMessage make_feedback(const EstimatedChannel& est, const Quantizer& q_alpha,
                                     const Quantizer& q_theta) {
  FeedbackMessage fb;
  fb.alpha_q = q_alpha(est.alpha_hat);
  fb.theta_q = q_theta(est.theta_hat);
  fb.theta_delta = fb.theta_q - est.theta_hat;
  return fb;
}

/// Unquantized feedback (the N_q -> infinity limit).
inline FeedbackMessage make_feedback(const EstimatedChannel& est) {
  return FeedbackMessage{est.alpha_hat, est.theta_hat, 0.0};
}

/// Training-time feedback: theta_delta is drawn uniformly from the angle
/// quantizer's half-segment interval instead of quantizing a specific phase.
inline FeedbackMessage simulate_feedback(const EstimatedChannel& est, int n_q, Rng& rng) {
  if (n_q == 0) return make_feedback(est);
  const double half = kPi / std::ldexp(1.0, n_q);
  FeedbackMessage fb;
  fb.alpha_q = alpha_quantizer(n_q)(est.alpha_hat);
  fb.theta_delta = uniform(rng, -half, half);
  fb.theta_q = wrap_angle(est.theta_hat + fb.theta_delta);
  return fb;
}

inline EquivalentChannel normalize_imperfect(const EstimatedChannel& est, const FeedbackMessage& fb,
                                             const ChannelRealization& true_ch, double noise_var) {
  const double r11 = std::abs(est.hhat11);
  const double r22 = std::abs(est.hhat22);
  if (!(r11 > 0.0) || !(r22 > 0.0)) throw DegenerateChannel("estimated direct channel gain is zero");
  auto consistent = [](Complex hhat, Complex eps, Complex h) {
    return std::abs(hhat + eps - h) <= 1e-9 * (1.0 + std::abs(h));
  };
  if (!consistent(est.hhat11, est.eps11, true_ch.h11) || !consistent(est.hhat21, est.eps21, true_ch.h21) ||
      !consistent(est.hhat22, est.eps22, true_ch.h22)) {
    throw Error("estimate does not match the channel it was derived from");
  }
  EquivalentChannel eq;
  eq.sqrt_alpha = std::abs(est.hhat21) / r11;
  eq.hbar11 = 1.0 + est.eps11 / est.hhat11;
  eq.hbar22 = 1.0 + est.eps22 / est.hhat22;
  eq.hbar21 = eq.sqrt_alpha * std::polar(1.0, fb.theta_delta) + est.eps21 / est.hhat11;
  eq.noise_var_rx1 = noise_var / std::norm(est.hhat11);
  eq.noise_var_rx2 = noise_var / std::norm(est.hhat22);
  return eq;
}

// ---------------------------------------------------------------------------
// Transmission

inline std::pair<Complex, Complex> apply_channel_with_noise(const EquivalentChannel& eq, Complex x1, Complex x2,
                                                            Complex n1, Complex n2) {
  return {eq.hbar11 * x1 + eq.hbar21 * x2 + n1, eq.hbar22 * x2 + n2};
}

inline std::pair<Complex, Complex> apply_channel(const EquivalentChannel& eq, Complex x1, Complex x2, Rng& rng) {
  const Complex n1 = complex_gaussian(rng, Complex{}, eq.noise_var_rx1);
  const Complex n2 = complex_gaussian(rng, Complex{}, eq.noise_var_rx2);
  return apply_channel_with_noise(eq, x1, x2, n1, n2);
}

// ---------------------------------------------------------------------------
// Link preparation shared by training and evaluation

/// One channel use-case: the coefficients to simulate plus the side
/// information each node holds.
struct Link {
  EquivalentChannel channel{};
  double sqrt_alpha_tx = 0.0;   // known at Tx1, Tx2 and Rx2
  double sqrt_alpha_rx1 = 0.0;  // known at Rx1
  double theta_delta = 0.0;     // known at Rx1 only
};

inline Link perfect_link(double alpha, double noise_var) {
  Link link;
  link.channel = unit_channel(alpha, noise_var);
  link.sqrt_alpha_tx = link.channel.sqrt_alpha;
  link.sqrt_alpha_rx1 = link.channel.sqrt_alpha;
  return link;
}

/// Random direct gains, cross gain fixed to sqrt(alpha) after normalization.
inline Link draw_perfect_link(const ChannelDistribution& dist, double alpha, double noise_var, Rng& rng) {
  if (!(alpha >= 0.0)) throw ConfigError("interference gain alpha must be >= 0");
  for (int attempt = 0; attempt < 1000; ++attempt) {
    ChannelRealization ch = draw_channel(dist, rng);
    if (!(std::abs(ch.h11) > 0.0) || !(std::abs(ch.h22) > 0.0)) continue;
    Link link;
    link.channel = normalize_perfect(ch, noise_var);
    // the cross gain is specified after normalization, so set it exactly
    link.channel.sqrt_alpha = std::sqrt(alpha);
    link.channel.hbar21 = Complex(link.channel.sqrt_alpha, 0.0);
    link.sqrt_alpha_tx = link.channel.sqrt_alpha;
    link.sqrt_alpha_rx1 = link.channel.sqrt_alpha;
    return link;
  }
  throw DegenerateChannel("could not draw a channel with nonzero direct gains");
}

enum class FeedbackModel {
  kSimulated,  // theta_delta drawn uniformly (training)
  kQuantized,  // real quantizer applied to the estimated phase (evaluation)
};

/// Rejection-samples an imperfect channel, builds the feedback and the
/// equivalent coefficients.
inline Link draw_imperfect_link(const ChannelDistribution& dist, const CsiConfig& csi, double alpha,
                                double noise_var, FeedbackModel feedback, Rng& rng) {
  csi.validate();
  for (int attempt = 0; attempt < 1000000; ++attempt) {
    ChannelRealization ch = draw_channel(dist, rng);
    ch.h21 = draw_interference(alpha, rng);
    const EstimatedChannel est = estimate(ch, csi.estimation, rng);
    if (!accept_channel(est, csi.estimation)) continue;
    FeedbackMessage fb;
    if (csi.n_q == 0) {
      fb = make_feedback(est);
    } else if (feedback == FeedbackModel::kSimulated) {
      fb = simulate_feedback(est, csi.n_q, rng);
    } else {
      fb = make_feedback(est, alpha_quantizer(csi.n_q), angle_quantizer(csi.n_q));
    }
    Link link;
    link.channel = normalize_imperfect(est, fb, ch, noise_var);
    link.sqrt_alpha_tx = std::sqrt(fb.alpha_q);
    link.sqrt_alpha_rx1 = std::sqrt(est.alpha_hat);
    link.theta_delta = fb.theta_delta;
    return link;
  }
  throw DegenerateChannel("no channel passed the estimation-error threshold");
}

inline Link draw_link(const ChannelDistribution& dist, const CsiConfig& csi, double alpha, double noise_var,
                      FeedbackModel feedback, Rng& rng) {
  if (csi.imperfect) return draw_imperfect_link(dist, csi, alpha, noise_var, feedback, rng);
  return draw_perfect_link(dist, alpha, noise_var, rng);
}

/// Noise power for a given SNR in dB relative to the transmit power.
inline double noise_var_from_snr(double snr_db, double p_t) { return p_t / std::pow(10.0, snr_db / 10.0); }

}  // namespace zic
