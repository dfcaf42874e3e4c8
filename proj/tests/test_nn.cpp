#include <gtest/gtest.h>

#include <cmath>
#include <functional>

#include "zic/nn/adam.hpp"
#include "zic/nn/layers.hpp"
#include "zic/nn/loss.hpp"

using namespace zic;
using namespace zic::nn;

namespace {

Tensor2 random_tensor(Eigen::Index r, Eigen::Index c, Rng& rng, double scale = 1.0) {
  Tensor2 t(r, c);
  std::normal_distribution<double> nd(0.0, scale);
  for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = nd(rng);
  return t;
}

// Scalar test loss sum(w .* y) with fixed random w, so dL/dy = w.
struct Probe {
  Tensor2 w;
  double operator()(const Tensor2& y) const { return (w.array() * y.array()).sum(); }
};

double rel_error(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8}); }

/// Central difference of f with respect to every entry of `t`, compared
/// with `analytic`.
double max_fd_error(Tensor2& t, const Tensor2& analytic, const std::function<double()>& f, double h = 1e-5) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < t.size(); ++i) {
    const double saved = t.data()[i];
    t.data()[i] = saved + h;
    const double up = f();
    t.data()[i] = saved - h;
    const double down = f();
    t.data()[i] = saved;
    worst = std::max(worst, rel_error(analytic.data()[i], (up - down) / (2.0 * h)));
  }
  return worst;
}

}  // namespace

TEST(Nn, TanhIdentityMatchesStd) {
  Tensor2 z(1, 9);
  z << -800.0, -20.0, -3.0, -0.5, 0.0, 1e-9, 0.7, 19.0, 800.0;
  Tensor2 y = z;
  zic::nn::detail::activate(y, Activation::kTanh);
  for (Eigen::Index i = 0; i < z.size(); ++i) EXPECT_NEAR(y(0, i), std::tanh(z(0, i)), 1e-15);
}

TEST(Nn, DenseForwardValues) {
  Rng rng = make_stream(3, {1});
  Dense d(2, 1, Activation::kNone, rng);
  d.weight.value << 2.0, -1.0;
  d.bias.value << 0.5;
  Tensor2 x(2, 2);
  x << 1.0, 1.0, 3.0, 2.0;
  const Tensor2 y = dense_forward(d, x);
  EXPECT_DOUBLE_EQ(y(0, 0), 1.5);
  EXPECT_DOUBLE_EQ(y(1, 0), 4.5);
  EXPECT_THROW(dense_forward(d, Tensor2::Zero(2, 3)), ShapeError);
}

TEST(Nn, GlorotInitRange) {
  Rng rng = make_stream(3, {2});
  Dense d(10, 30, Activation::kTanh, rng);
  const double limit = std::sqrt(6.0 / 40.0);
  EXPECT_LE(d.weight.value.cwiseAbs().maxCoeff(), limit);
  EXPECT_EQ(d.bias.value.squaredNorm(), 0.0);
}

TEST(Nn, DenseGradientsMatchFiniteDifferences) {
  Rng rng = make_stream(3, {3});
  for (auto act : {Activation::kNone, Activation::kTanh, Activation::kSigmoid}) {
    Dense d(4, 3, act, rng);
    d.bias.value = random_tensor(1, 3, rng, 0.3);
    Tensor2 x = random_tensor(5, 4, rng);
    const Probe probe{random_tensor(5, 3, rng)};
    d.zero_grad();
    d.forward(x);
    const Tensor2 dx = d.backward(probe.w);
    auto f = [&] { return probe(d.infer(x)); };
    EXPECT_LT(max_fd_error(d.weight.value, d.weight.grad, f), 1e-5);
    EXPECT_LT(max_fd_error(d.bias.value, d.bias.grad, f), 1e-5);
    EXPECT_LT(max_fd_error(x, dx, f), 1e-5);
  }
}

TEST(Nn, ResidualStackGradients) {
  Rng rng = make_stream(3, {4});
  for (bool shortcuts : {true, false}) {
    HiddenStack s(4, 2, shortcuts, rng);
    Tensor2 x = random_tensor(6, 4, rng);
    const Probe probe{random_tensor(6, 4, rng)};
    for (auto& l : s.layers()) l.zero_grad();
    s.forward(x);
    const Tensor2 dx = s.backward(probe.w);
    auto f = [&] { return probe(s.infer(x)); };
    EXPECT_LT(max_fd_error(x, dx, f), 1e-5);
    for (auto& l : s.layers()) EXPECT_LT(max_fd_error(l.weight.value, l.weight.grad, f), 1e-5);
  }
}

TEST(Nn, ResidualAddShapes) {
  EXPECT_THROW(residual_add(Tensor2::Zero(2, 3), Tensor2::Zero(2, 2)), ShapeError);
  const Tensor2 r = residual_add(Tensor2::Ones(2, 2), Tensor2::Ones(2, 2));
  EXPECT_EQ(r.sum(), 8.0);
}

TEST(Nn, BatchPowerNormUnitMeanSquare) {
  Rng rng = make_stream(3, {5});
  BatchPowerNorm bn(2);
  for (int i = 0; i < 20; ++i) {
    const Tensor2 y = batch_power_norm_forward(bn, random_tensor(50, 2, rng, 3.0), true);
    for (int c = 0; c < 2; ++c) EXPECT_NEAR(y.col(c).squaredNorm() / 50.0, 1.0, 1e-10);
  }
  EXPECT_TRUE(bn.initialized());
  EXPECT_GT(bn.running_ms().minCoeff(), 0.0);
}

TEST(Nn, BatchPowerNormGradientThroughStatistic) {
  Rng rng = make_stream(3, {6});
  BatchPowerNorm bn(2);
  Tensor2 x = random_tensor(7, 2, rng);
  const Probe probe{random_tensor(7, 2, rng)};
  bn.forward(x, true);
  const Tensor2 dx = bn.backward(probe.w);
  auto f = [&] { return probe(bn.forward(x, true)); };
  EXPECT_LT(max_fd_error(x, dx, f), 1e-4);
}

TEST(Nn, BatchPowerNormRunningStatistics) {
  BatchPowerNorm bn(2, 0.5);
  Tensor2 a(2, 2);
  a << 2.0, 1.0, 2.0, 1.0;
  bn.forward(a, true);
  EXPECT_DOUBLE_EQ(bn.running_ms()(0, 0), 4.0);
  Tensor2 b(2, 2);
  b << 0.0, 3.0, 0.0, 3.0;
  bn.forward(b, true);
  EXPECT_DOUBLE_EQ(bn.running_ms()(0, 0), 2.0);
  EXPECT_DOUBLE_EQ(bn.running_ms()(0, 1), 5.0);
  // inference uses the frozen statistic and leaves it unchanged
  const Tensor2 y = bn.infer(a);
  EXPECT_DOUBLE_EQ(y(0, 0), 2.0 / std::sqrt(2.0));
  bn.forward(a, false);
  EXPECT_DOUBLE_EQ(bn.running_ms()(0, 0), 2.0);
  EXPECT_THROW(BatchPowerNorm(2, 1.0), ConfigError);
}

TEST(Nn, BatchPowerNormZeroColumnIsFloored) {
  BatchPowerNorm bn(2);
  Tensor2 x = Tensor2::Zero(4, 2);
  x.col(1).setConstant(1.0);
  const Tensor2 y = bn.forward(x, true);
  EXPECT_TRUE(all_finite(y));
  EXPECT_TRUE(all_finite(bn.backward(Tensor2::Ones(4, 2))));
}

TEST(Nn, PowerNormConstraintAndGradient) {
  Rng rng = make_stream(3, {7});
  PowerNorm pn(1.7);
  for (int i = 0; i < 1000; ++i) {
    const Tensor2 g = power_norm_forward(pn, random_tensor(1, 2, rng));
    EXPECT_NEAR(g.squaredNorm(), 1.7, 1e-12);
  }
  Tensor2 g0 = random_tensor(3, 2, rng);
  const Probe probe{random_tensor(3, 2, rng)};
  pn.forward(g0);
  const Tensor2 dg = pn.backward(probe.w);
  auto f = [&] { return probe(pn.infer(g0)); };
  EXPECT_LT(max_fd_error(g0, dg, f), 1e-5);
  EXPECT_NEAR(pn.infer(Tensor2::Zero(1, 2)).squaredNorm(), 1.7, 1e-12);
  EXPECT_THROW(PowerNorm(0.0), ConfigError);
}

TEST(Nn, GaussianNoiseVariance) {
  Rng rng = make_stream(3, {8});
  const Tensor2 y = gaussian_noise(Tensor2::Zero(200000, 2), 0.05, rng);
  EXPECT_NEAR(y.squaredNorm() / y.size(), 0.05, 0.001);
  EXPECT_EQ(gaussian_noise(Tensor2::Ones(3, 2), 0.0, rng), Tensor2::Ones(3, 2));
}

TEST(Nn, BceValuesAndClamp) {
  Tensor2 s(1, 2), p(1, 2);
  s << 1.0, 0.0;
  p << 0.8, 0.3;
  EXPECT_NEAR(bce_loss(s, p), -(std::log(0.8) + std::log(0.7)), 1e-15);
  p << 1.0, 0.0;
  EXPECT_NEAR(bce_loss(s, p), -2.0 * std::log(1.0 - 1e-7), 1e-15);
  p << 0.0, 1.0;
  EXPECT_NEAR(bce_loss(s, p), -2.0 * std::log(1e-7), 1e-9);
  EXPECT_EQ(bce_grad(s, p).squaredNorm(), 0.0);
}

TEST(Nn, BceGradient) {
  Rng rng = make_stream(3, {9});
  Tensor2 s(4, 3);
  for (Eigen::Index i = 0; i < s.size(); ++i) s.data()[i] = static_cast<double>(rng() & 1U);
  Tensor2 p = (random_tensor(4, 3, rng).array().tanh() * 0.45 + 0.5).matrix();
  const Tensor2 g = bce_grad(s, p);
  EXPECT_LT(max_fd_error(p, g, [&] { return bce_loss(s, p); }, 1e-7), 1e-5);
}

TEST(Nn, BceOnLogitsMatchesProbabilityForm) {
  Rng rng = make_stream(3, {10});
  Tensor2 s(5, 2);
  for (Eigen::Index i = 0; i < s.size(); ++i) s.data()[i] = static_cast<double>(rng() & 1U);
  const Tensor2 z = random_tensor(5, 2, rng) * 3.0;
  const Tensor2 p = sigmoid(z);
  EXPECT_NEAR(bce_with_logits_loss(s, z), bce_loss(s, p), 1e-12);
  const Tensor2 g = bce_with_logits_grad(s, z);
  Tensor2 zz = z;
  EXPECT_LT(max_fd_error(zz, g, [&] { return bce_with_logits_loss(s, zz); }, 1e-6), 1e-6);
}

TEST(Nn, BceOnLogitsKeepsGradientWhenSaturated) {
  Tensor2 s(1, 2), z(1, 2);
  s << 0.0, 1.0;
  z << 800.0, -800.0;
  EXPECT_NEAR(bce_with_logits_loss(s, z), 1600.0, 1e-9);
  const Tensor2 g = bce_with_logits_grad(s, z);
  EXPECT_DOUBLE_EQ(g(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(g(0, 1), -1.0);
  z << -800.0, 800.0;
  EXPECT_EQ(bce_with_logits_loss(s, z), 0.0);
}

TEST(Nn, AdamFirstStepsByHand) {
  Param p;
  p.value = Tensor2::Constant(1, 1, 1.0);
  p.grad = Tensor2::Constant(1, 1, 0.5);
  Adam opt(AdamOptions{0.1, 0.95});
  Param* list[] = {&p};
  optimizer_step(opt, list);
  // first step: m_hat = g, v_hat = g^2, update = lr * g / (|g| + eps)
  EXPECT_NEAR(p.value(0, 0), 1.0 - 0.1 * 0.5 / (0.5 + 1e-8), 1e-15);
  p.grad(0, 0) = -1.0;
  optimizer_step(opt, list);
  const double m = (0.9 * 0.05 + 0.1 * -1.0) / (1.0 - 0.81);
  const double v = (0.999 * 0.001 * 0.25 + 0.001 * 1.0) / (1.0 - 0.999 * 0.999);
  EXPECT_NEAR(p.value(0, 0), 1.0 - 0.1 * 0.5 / (0.5 + 1e-8) - 0.1 * m / (std::sqrt(v) + 1e-8), 1e-12);
  EXPECT_EQ(opt.steps(), 2);
}

TEST(Nn, LearningRateDecay) {
  Adam opt(AdamOptions{0.01, 0.95});
  decay_learning_rate(opt);
  EXPECT_NEAR(opt.learning_rate(), 0.0095, 1e-15);
  for (int k = 0; k < 9; ++k) decay_learning_rate(opt);
  EXPECT_NEAR(opt.learning_rate(), 0.01 * std::pow(0.95, 10), 1e-15);
  Adam flat(AdamOptions{0.01, 1.0});
  decay_learning_rate(flat);
  EXPECT_EQ(flat.learning_rate(), 0.01);
}

TEST(Nn, AdamMinimizesQuadratic) {
  Param p;
  p.value = Tensor2::Constant(1, 3, 5.0);
  Adam opt(AdamOptions{0.1, 1.0});
  Param* list[] = {&p};
  for (int i = 0; i < 2000; ++i) {
    p.grad = 2.0 * (p.value.array() - 1.0).matrix();
    opt.step(list);
  }
  EXPECT_LT((p.value.array() - 1.0).abs().maxCoeff(), 1e-3);
}
