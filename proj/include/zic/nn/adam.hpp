#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "zic/nn/tensor.hpp"

namespace zic::nn {

struct AdamOptions {
  double learning_rate = 1e-2;
  double decay = 0.95;  // multiplicative learning-rate drop
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Adaptive-moment optimizer with bias-corrected moments.
class Adam {
 public:
  explicit Adam(AdamOptions opts = {}) : opts_(opts), lr_(opts.learning_rate) {}

  double learning_rate() const { return lr_; }
  long steps() const { return step_; }
  const AdamOptions& options() const { return opts_; }

  void step(std::span<Param* const> params) {
    if (first_.empty()) {
      for (const Param* p : params) {
        first_.push_back(Tensor2::Zero(p->value.rows(), p->value.cols()));
        second_.push_back(Tensor2::Zero(p->value.rows(), p->value.cols()));
      }
    }
    if (first_.size() != params.size()) throw ShapeError("optimizer parameter list changed");
    ++step_;
    const double c1 = 1.0 - std::pow(opts_.beta1, static_cast<double>(step_));
    const double c2 = 1.0 - std::pow(opts_.beta2, static_cast<double>(step_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      Param& p = *params[i];
      require_shape(p.grad, first_[i].rows(), first_[i].cols(), "optimizer gradient");
      first_[i] = opts_.beta1 * first_[i] + (1.0 - opts_.beta1) * p.grad;
      second_[i] = opts_.beta2 * second_[i] + (1.0 - opts_.beta2) * p.grad.cwiseAbs2();
      p.value.array() -=
          lr_ * (first_[i].array() / c1) / ((second_[i].array() / c2).sqrt() + opts_.epsilon);
    }
  }

  void decay_learning_rate() { lr_ *= opts_.decay; }

 private:
  AdamOptions opts_;
  double lr_;
  long step_ = 0;
  std::vector<Tensor2> first_;
  std::vector<Tensor2> second_;
};

inline void optimizer_step(Adam& state, std::span<Param* const> params) { state.step(params); }
inline void decay_learning_rate(Adam& state) { state.decay_learning_rate(); }

}  // namespace zic::nn
