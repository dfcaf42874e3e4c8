#pragma once

#include <algorithm>
#include <cmath>

#include "zic/nn/tensor.hpp"

namespace zic::nn {

inline constexpr double kProbabilityClamp = 1e-7;

/// Binary cross-entropy summed over bit positions and averaged over the
/// batch. Probabilities are clamped to [1e-7, 1 - 1e-7].
inline double bce_loss(const Tensor2& s, const Tensor2& s_hat) {
  require_shape(s_hat, s.rows(), s.cols(), "bce prediction");
  double acc = 0.0;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    const double p = std::clamp(s_hat.data()[i], kProbabilityClamp, 1.0 - kProbabilityClamp);
    const double t = s.data()[i];
    acc += t * std::log(p) + (1.0 - t) * std::log(1.0 - p);
  }
  return -acc / static_cast<double>(s.rows());
}

/// dL/ds_hat; zero where the clamp is active.
inline Tensor2 bce_grad(const Tensor2& s, const Tensor2& s_hat) {
  require_shape(s_hat, s.rows(), s.cols(), "bce prediction");
  Tensor2 g(s.rows(), s.cols());
  const double inv_n = 1.0 / static_cast<double>(s.rows());
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    const double p = s_hat.data()[i];
    const double t = s.data()[i];
    if (p < kProbabilityClamp || p > 1.0 - kProbabilityClamp) {
      g.data()[i] = 0.0;
    } else {
      g.data()[i] = inv_n * (p - t) / (p * (1.0 - p));
    }
  }
  return g;
}

/// Same loss written on the sigmoid's pre-activation z, evaluated as
/// max(z, 0) - t z + log(1 + e^{-|z|}) so it never saturates.
inline double bce_with_logits_loss(const Tensor2& s, const Tensor2& z) {
  require_shape(z, s.rows(), s.cols(), "bce logits");
  double acc = 0.0;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    const double v = z.data()[i];
    acc += std::max(v, 0.0) - s.data()[i] * v + std::log1p(std::exp(-std::abs(v)));
  }
  return acc / static_cast<double>(s.rows());
}

/// dL/dz = (sigmoid(z) - t) / N, exact for all z.
inline Tensor2 bce_with_logits_grad(const Tensor2& s, const Tensor2& z) {
  require_shape(z, s.rows(), s.cols(), "bce logits");
  const Tensor2 p = (1.0 / (1.0 + (-z.array()).exp())).matrix();
  return (p - s) / static_cast<double>(s.rows());
}

}  // namespace zic::nn
