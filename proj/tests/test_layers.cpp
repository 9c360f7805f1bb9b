#include <gtest/gtest.h>

#include "didfuse/activation.hpp"
#include "didfuse/batchnorm.hpp"
#include "support/gradcheck.hpp"

using namespace didfuse;
using dftest::random_tensor;

TEST(BatchNorm, EvalWithIdentityStatsIsNearIdentity) {
  std::mt19937_64 rng(21);
  const auto x = random_tensor<float>(Shape{2, 3, 4, 4}, rng);
  const auto r = batchnorm_forward(x, BatchNormParams<float>::identity(3), Mode::Eval);
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(r.output[i], x[i], 1e-5);
  EXPECT_TRUE(r.batch_mean.empty());
}

TEST(BatchNorm, TrainNormalizesPerChannel) {
  std::mt19937_64 rng(22);
  auto x = random_tensor<float>(Shape{2, 3, 5, 4}, rng, 2.0, 7.0);
  const auto r = batchnorm_forward(x, BatchNormParams<float>::identity(3), Mode::Train);
  for (int c = 0; c < 3; ++c) {
    double m = 0, v = 0;
    for (int b = 0; b < 2; ++b)
      for (float e : r.output.plane(b, c)) m += e;
    m /= 40;
    for (int b = 0; b < 2; ++b)
      for (float e : r.output.plane(b, c)) v += (e - m) * (e - m);
    v /= 40;
    EXPECT_NEAR(m, 0.0, 1e-4);
    EXPECT_NEAR(v, 1.0, 1e-4);
  }
}

TEST(BatchNorm, AffineApplied) {
  Tensor x(Shape{1, 1, 1, 2}, std::vector<float>{-1, 1});
  auto p = BatchNormParams<float>::identity(1);
  p.gamma[0] = 2.0f;
  p.beta[0] = 0.5f;
  const auto r = batchnorm_forward(x, p, Mode::Train);
  const double s = 1.0 / std::sqrt(1.0 + kBatchNormEpsilon);
  EXPECT_NEAR(r.output[0], 0.5 - 2 * s, 1e-6);
  EXPECT_NEAR(r.output[1], 0.5 + 2 * s, 1e-6);
}

TEST(BatchNorm, ZeroVarianceChannelStaysFinite) {
  Tensor x(Shape{2, 1, 3, 3}, 4.0f);
  const auto r = batchnorm_forward(x, BatchNormParams<float>::identity(1), Mode::Train);
  for (float v : r.output.data()) EXPECT_EQ(v, 0.0f);
  const auto g = batchnorm_backward(Tensor(x.shape(), 1.0f), r.cache, std::vector<float>{1.0f});
  EXPECT_TRUE(g.input.all_finite());
}

TEST(BatchNorm, TrainNeedsTwoValues) {
  EXPECT_THROW(batchnorm_forward(Tensor(Shape{1, 2, 1, 1}), BatchNormParams<float>::identity(2), Mode::Train),
               ShapeError);
  EXPECT_NO_THROW(batchnorm_forward(Tensor(Shape{1, 2, 1, 1}), BatchNormParams<float>::identity(2), Mode::Eval));
}

TEST(BatchNorm, ParameterLengthChecked) {
  EXPECT_THROW(batchnorm_forward(Tensor(Shape{1, 2, 3, 3}), BatchNormParams<float>::identity(3), Mode::Eval),
               ShapeError);
}

TEST(BatchNorm, RunningStatsMovingAverage) {
  // Channel values {1, 3}: mean 2, unbiased variance 2.
  Tensor x(Shape{1, 1, 1, 2}, std::vector<float>{1, 3});
  auto p = BatchNormParams<float>::identity(1);
  const auto r = batchnorm_forward(x, p, Mode::Train);
  ASSERT_EQ(r.batch_mean.size(), 1u);
  EXPECT_DOUBLE_EQ(r.batch_mean[0], 2.0);
  EXPECT_DOUBLE_EQ(r.batch_var[0], 2.0);
  update_running_stats(p, r.batch_mean, r.batch_var);
  EXPECT_FLOAT_EQ(p.running_mean[0], 0.9f * 0.0f + 0.1f * 2.0f);
  EXPECT_FLOAT_EQ(p.running_var[0], 0.9f * 1.0f + 0.1f * 2.0f);
  EXPECT_EQ(r.next_running_mean, p.running_mean);
  EXPECT_EQ(r.next_running_var, p.running_var);
}

TEST(BatchNorm, EvalUsesRunningStats) {
  Tensor x(Shape{1, 1, 1, 2}, std::vector<float>{3, 5});
  auto p = BatchNormParams<float>::identity(1);
  p.running_mean[0] = 1.0f;
  p.running_var[0] = 4.0f;
  const auto r = batchnorm_forward(x, p, Mode::Eval);
  const double s = 1.0 / std::sqrt(4.0 + kBatchNormEpsilon);
  EXPECT_NEAR(r.output[0], 2 * s, 1e-6);
  EXPECT_NEAR(r.output[1], 4 * s, 1e-6);
}

class BatchNormGradient : public ::testing::TestWithParam<Mode> {};

TEST_P(BatchNormGradient, MatchesFiniteDifferences) {
  const Mode mode = GetParam();
  std::mt19937_64 rng(23);
  auto x = random_tensor<double>(Shape{2, 4, 6, 6}, rng);
  auto p = BatchNormParams<double>::identity(4);
  for (int c = 0; c < 4; ++c) {
    p.gamma[c] = 0.5 + 0.3 * c;
    p.beta[c] = 0.1 * c - 0.2;
    p.running_mean[c] = 0.05 * c;
    p.running_var[c] = 0.5 + 0.25 * c;
  }
  const auto w = random_tensor<double>(x.shape(), rng);

  auto pf = BatchNormParams<float>{std::vector<float>(p.gamma.begin(), p.gamma.end()),
                                   std::vector<float>(p.beta.begin(), p.beta.end()),
                                   std::vector<float>(p.running_mean.begin(), p.running_mean.end()),
                                   std::vector<float>(p.running_var.begin(), p.running_var.end())};
  const auto fwd = batchnorm_forward(x.cast<float>(), pf, mode);
  const auto g = batchnorm_backward(w.cast<float>(), fwd.cache, pf.gamma);

  auto loss = [&] { return dftest::weighted_sum(batchnorm_forward(x, p, mode).output, w); };
  const auto n_x = dftest::numeric_gradient(x.data(), loss);
  const auto n_gamma = dftest::numeric_gradient(std::span<double>(p.gamma), loss);
  const auto n_beta = dftest::numeric_gradient(std::span<double>(p.beta), loss);
  EXPECT_LT(dftest::relative_error(dftest::to_doubles<float>(g.input.data()), n_x), dftest::kFdTolerance);
  EXPECT_LT(dftest::relative_error(dftest::to_doubles<float>(g.gamma), n_gamma), dftest::kFdTolerance);
  EXPECT_LT(dftest::relative_error(dftest::to_doubles<float>(g.beta), n_beta), dftest::kFdTolerance);
}

INSTANTIATE_TEST_SUITE_P(Modes, BatchNormGradient, ::testing::Values(Mode::Train, Mode::Eval));

TEST(Activation, PointValues) {
  Tensor x(Shape{1, 1, 1, 3}, std::vector<float>{-2, 0, 3});
  EXPECT_EQ(activation_forward(x, Activation::PReLU, 0.25).vec(), (std::vector<float>{-0.5f, 0.0f, 3.0f}));
  const auto s = activation_forward(x, Activation::Sigmoid);
  const auto t = activation_forward(x, Activation::Tanh);
  EXPECT_EQ(s[1], 0.5f);
  EXPECT_EQ(t[1], 0.0f);
  EXPECT_FLOAT_EQ(t[0], static_cast<float>(std::tanh(-2.0)));
}

TEST(Activation, SigmoidSaturatesWithoutOverflow) {
  Tensor x(Shape{1, 1, 1, 2}, std::vector<float>{-1000, 1000});
  const auto s = activation_forward(x, Activation::Sigmoid);
  EXPECT_TRUE(s.all_finite());
  EXPECT_EQ(s[0], 0.0f);
  EXPECT_EQ(s[1], 1.0f);
}

TEST(Activation, PReluSlopeGradientByHand) {
  Tensor x(Shape{1, 1, 1, 1}, std::vector<float>{-2});
  Tensor g(Shape{1, 1, 1, 1}, std::vector<float>{1});
  const auto y = activation_forward(x, Activation::PReLU, 0.25);
  const auto r = activation_backward(g, x, y, Activation::PReLU, 0.25);
  EXPECT_DOUBLE_EQ(r.slope, -2.0);
  EXPECT_FLOAT_EQ(r.input[0], 0.25f);
}

class ActivationGradient : public ::testing::TestWithParam<Activation> {};

TEST_P(ActivationGradient, MatchesFiniteDifferences) {
  const Activation kind = GetParam();
  std::mt19937_64 rng(24);
  auto x = random_tensor<double>(Shape{2, 4, 6, 6}, rng, -2.0, 2.0);
  dftest::keep_away_from_zero(x, 0.01);
  const auto w = random_tensor<double>(x.shape(), rng);
  double slope = 0.3;

  const auto xf = x.cast<float>();
  const auto yf = activation_forward(xf, kind, slope);
  const auto g = activation_backward(w.cast<float>(), xf, yf, kind, slope);

  auto loss = [&] { return dftest::weighted_sum(activation_forward(x, kind, slope), w); };
  const auto n_x = dftest::numeric_gradient(x.data(), loss);
  EXPECT_LT(dftest::relative_error(dftest::to_doubles<float>(g.input.data()), n_x), dftest::kFdTolerance);
  if (kind == Activation::PReLU) {
    const auto n_s = dftest::numeric_gradient(std::span<double>(&slope, 1), loss);
    EXPECT_LT(dftest::relative_error(std::vector<double>{g.slope}, n_s), dftest::kFdTolerance);
  }
}

INSTANTIATE_TEST_SUITE_P(Kinds, ActivationGradient,
                         ::testing::Values(Activation::PReLU, Activation::Tanh, Activation::Sigmoid));
