#pragma once

#include <cmath>
#include <vector>

#include "zic/nn/tensor.hpp"
#include "zic/random.hpp"

namespace zic::nn {

enum class Activation { kNone, kTanh, kSigmoid };

namespace detail {

inline void activate(Tensor2& z, Activation act) {
  switch (act) {
    case Activation::kNone:
      break;
    case Activation::kTanh:
      // tanh(z) = 1 - 2 / (e^{2z} + 1); Eigen vectorizes exp but not tanh
      // for doubles. Saturates cleanly to +-1 when exp over/underflows.
      z = (1.0 - 2.0 / ((2.0 * z.array()).exp() + 1.0)).matrix();
      break;
    case Activation::kSigmoid:
      z = (1.0 / (1.0 + (-z.array()).exp())).matrix();
      break;
  }
}

/// dL/dz from dL/dy and the cached activation output y.
inline Tensor2 activation_backward(const Tensor2& dy, const Tensor2& y, Activation act) {
  switch (act) {
    case Activation::kTanh:
      return (dy.array() * (1.0 - y.array().square())).matrix();
    case Activation::kSigmoid:
      return (dy.array() * y.array() * (1.0 - y.array())).matrix();
    case Activation::kNone:
      break;
  }
  return dy;
}

}  // namespace detail

inline Tensor2 sigmoid(Tensor2 z) {
  detail::activate(z, Activation::kSigmoid);
  return z;
}

/// Fully connected layer y = act(x W^T + b).
class Dense {
 public:
  Dense() = default;

  /// Glorot-uniform weights, zero bias.
  Dense(int in, int out, Activation act, Rng& rng) : activation_(act) {
    if (in < 1 || out < 1) throw ShapeError("dense layer needs positive widths");
    const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    std::uniform_real_distribution<double> u(-limit, limit);
    weight.value.resize(out, in);
    for (Eigen::Index i = 0; i < weight.value.size(); ++i) weight.value.data()[i] = u(rng);
    bias.value = Tensor2::Zero(1, out);
    zero_grad();
  }

  Eigen::Index in_features() const { return weight.value.cols(); }
  Eigen::Index out_features() const { return weight.value.rows(); }
  Activation activation() const { return activation_; }

  Tensor2 infer(const Tensor2& x) const {
    require_shape(x, -1, in_features(), "dense input");
    Tensor2 z = x * weight.value.transpose();
    z.rowwise() += bias.value.row(0);
    detail::activate(z, activation_);
    return z;
  }

  Tensor2 forward(const Tensor2& x) {
    x_ = x;
    y_ = infer(x);
    return y_;
  }

  /// Accumulates parameter gradients and returns dL/dx.
  Tensor2 backward(const Tensor2& dy) {
    require_shape(dy, y_.rows(), y_.cols(), "dense gradient");
    const Tensor2 dz = detail::activation_backward(dy, y_, activation_);
    weight.grad.noalias() += dz.transpose() * x_;
    bias.grad += dz.colwise().sum();
    return dz * weight.value;
  }

  void zero_grad() {
    weight.zero_grad();
    bias.zero_grad();
  }

  Param weight;
  Param bias;

 private:
  Activation activation_ = Activation::kNone;
  Tensor2 x_;
  Tensor2 y_;
};

inline Tensor2 dense_forward(const Dense& layer, const Tensor2& x) { return layer.infer(x); }

inline Tensor2 residual_add(const Tensor2& x, const Tensor2& fx) {
  require_shape(fx, x.rows(), x.cols(), "residual branch");
  return x + fx;
}

/// Chain of equal-width tanh layers, optionally with identity shortcuts
/// around each layer.
class HiddenStack {
 public:
  HiddenStack() = default;
  HiddenStack(int width, int depth, bool shortcuts, Rng& rng) : shortcuts_(shortcuts) {
    for (int i = 0; i < depth; ++i) layers_.emplace_back(width, width, Activation::kTanh, rng);
  }

  bool shortcuts() const { return shortcuts_; }
  std::vector<Dense>& layers() { return layers_; }
  const std::vector<Dense>& layers() const { return layers_; }

  Tensor2 infer(const Tensor2& x) const {
    Tensor2 h = x;
    for (const auto& l : layers_) h = shortcuts_ ? residual_add(h, l.infer(h)) : l.infer(h);
    return h;
  }

  Tensor2 forward(const Tensor2& x) {
    Tensor2 h = x;
    for (auto& l : layers_) h = shortcuts_ ? residual_add(h, l.forward(h)) : l.forward(h);
    return h;
  }

  Tensor2 backward(const Tensor2& dy) {
    Tensor2 g = dy;
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) {
      if (shortcuts_) {
        g += it->backward(g);
      } else {
        g = it->backward(g);
      }
    }
    return g;
  }

 private:
  bool shortcuts_ = true;
  std::vector<Dense> layers_;
};

/// Multiplicative batch normalization: every column is scaled to unit mean
/// square, with no centering and no learned shift.
///
/// Training mode uses the batch statistic (and differentiates through it)
/// and updates an exponential running mean square; inference mode scales by
/// the frozen running value. The first update initializes the running value
/// directly.
class BatchPowerNorm {
 public:
  static constexpr double kDefaultMomentum = 0.99;
  static constexpr double kEpsilon = 1e-12;

  BatchPowerNorm() = default;
  explicit BatchPowerNorm(int features, double momentum = kDefaultMomentum)
      : momentum_(momentum), running_ms_(Tensor2::Ones(1, features)) {
    if (!(momentum > 0.0 && momentum < 1.0)) throw ConfigError("batch norm momentum must lie in (0,1)");
  }

  Eigen::Index features() const { return running_ms_.cols(); }
  double momentum() const { return momentum_; }
  bool initialized() const { return initialized_; }
  const Tensor2& running_ms() const { return running_ms_; }

  void set_running(const Tensor2& ms, bool initialized) {
    require_shape(ms, 1, features(), "running mean square");
    running_ms_ = ms;
    initialized_ = initialized;
  }

  Tensor2 infer(const Tensor2& x) const {
    require_shape(x, -1, features(), "batch norm input");
    Tensor2 out = x;
    for (Eigen::Index c = 0; c < features(); ++c) out.col(c) *= 1.0 / std::sqrt(floored(running_ms_(0, c)));
    return out;
  }

  Tensor2 forward(const Tensor2& x, bool training) {
    require_shape(x, -1, features(), "batch norm input");
    x_ = x;
    batch_mode_ = training;
    ms_.resize(1, features());
    scale_.resize(1, features());
    for (Eigen::Index c = 0; c < features(); ++c) {
      const double ms = training ? x.col(c).squaredNorm() / static_cast<double>(x.rows()) : running_ms_(0, c);
      ms_(0, c) = ms;
      scale_(0, c) = 1.0 / std::sqrt(floored(ms));
    }
    if (training) {
      if (!initialized_) {
        running_ms_ = ms_;
        initialized_ = true;
      } else {
        running_ms_ = momentum_ * running_ms_ + (1.0 - momentum_) * ms_;
      }
    }
    Tensor2 out = x;
    for (Eigen::Index c = 0; c < features(); ++c) out.col(c) *= scale_(0, c);
    return out;
  }

  /// With y = x / sqrt(m), m = mean(x^2):
  /// dL/dx_i = g_i / sqrt(m) - x_i m^{-3/2} / N * sum_j g_j x_j.
  Tensor2 backward(const Tensor2& dy) const {
    require_shape(dy, x_.rows(), x_.cols(), "batch norm gradient");
    Tensor2 dx = dy;
    const double n = static_cast<double>(x_.rows());
    for (Eigen::Index c = 0; c < features(); ++c) {
      const double s = scale_(0, c);
      dx.col(c) = s * dy.col(c);
      if (batch_mode_ && ms_(0, c) > kEpsilon) {
        const double dot = dy.col(c).dot(x_.col(c));
        dx.col(c) -= (s * s * s * dot / n) * x_.col(c);
      }
    }
    return dx;
  }

 private:
  static double floored(double ms) { return ms > kEpsilon ? ms : kEpsilon; }

  double momentum_ = kDefaultMomentum;
  Tensor2 running_ms_;
  bool initialized_ = false;

  Tensor2 x_;
  Tensor2 ms_;
  Tensor2 scale_;
  bool batch_mode_ = true;
};

inline Tensor2 batch_power_norm_forward(BatchPowerNorm& layer, const Tensor2& x, bool training) {
  return layer.forward(x, training);
}

/// Row-wise gamma = sqrt(P_t) * g0 / |g0|, so every output row has squared
/// norm P_t. A row with |g0| below the epsilon floor maps to the equal split
/// sqrt(P_t / n) per entry and passes no gradient.
class PowerNorm {
 public:
  static constexpr double kEpsilon = 1e-12;

  PowerNorm() = default;
  explicit PowerNorm(double total_power) : total_power_(total_power) {
    if (!(total_power > 0.0)) throw ConfigError("power normalization needs P_t > 0");
  }

  double total_power() const { return total_power_; }

  Tensor2 infer(const Tensor2& g0) const {
    Tensor2 out = g0;
    const double root = std::sqrt(total_power_);
    for (Eigen::Index r = 0; r < g0.rows(); ++r) {
      const double raw = g0.row(r).norm();
      if (raw > kEpsilon) {
        out.row(r) *= root / raw;
      } else {
        out.row(r).setConstant(root / std::sqrt(static_cast<double>(g0.cols())));
      }
    }
    return out;
  }

  Tensor2 forward(const Tensor2& g0) {
    g0_ = g0;
    return infer(g0);
  }

  /// d gamma / d g0 = sqrt(P_t) (I/|g0| - g0 g0^T / |g0|^3).
  Tensor2 backward(const Tensor2& dy) const {
    require_shape(dy, g0_.rows(), g0_.cols(), "power norm gradient");
    Tensor2 dx(dy.rows(), dy.cols());
    const double root = std::sqrt(total_power_);
    for (Eigen::Index r = 0; r < dy.rows(); ++r) {
      const double nrm = g0_.row(r).norm();
      if (nrm > kEpsilon) {
        dx.row(r) = root / nrm * dy.row(r) - root * dy.row(r).dot(g0_.row(r)) / (nrm * nrm * nrm) * g0_.row(r);
      } else {
        dx.row(r).setZero();
      }
    }
    return dx;
  }

 private:

  double total_power_ = 1.0;
  Tensor2 g0_;
};

inline Tensor2 power_norm_forward(const PowerNorm& layer, const Tensor2& g0) { return layer.infer(g0); }

/// x + n with n i.i.d. N(0, var_per_component). Treated as a constant in the
/// backward pass.
inline Tensor2 gaussian_noise(const Tensor2& x, double var_per_component, Rng& rng) {
  if (!(var_per_component >= 0.0)) throw ConfigError("noise variance must be >= 0");
  Tensor2 out = x;
  if (var_per_component == 0.0) return out;
  std::normal_distribution<double> nd(0.0, std::sqrt(var_per_component));
  for (Eigen::Index i = 0; i < out.size(); ++i) out.data()[i] += nd(rng);
  return out;
}

}  // namespace zic::nn
