#include <gtest/gtest.h>

#include <random>

#include "support.hpp"

using namespace inkgan;
using testing_support::random_tensor;

TEST(BatchNorm, ConstantChannelNormalizesToZero) {
  NormBuffers<float> buf(2);
  const auto x = Tensor::full({3, 2, 2, 2}, 4.5F);
  const auto y = batch_norm(x, Tensor::full({2}, 1), Tensor::zeros({2}), buf, Mode::train);
  for (float v : y.values()) EXPECT_EQ(v, 0.0F);
}

TEST(BatchNorm, TrainOutputHasZeroMeanUnitVariancePerChannel) {
  std::mt19937_64 rng(2);
  NormBuffers<double> buf(3);
  const auto x = random_tensor<double>({4, 3, 5, 5}, rng, -3, 7);
  const auto y = batch_norm(x, Tensor64::full({3}, 1), Tensor64::zeros({3}), buf, Mode::train, 0.1, 0.0);
  for (std::size_t c = 0; c < 3; ++c) {
    double s = 0, s2 = 0;
    for (std::size_t b = 0; b < 4; ++b)
      for (std::size_t i = 0; i < 25; ++i) {
        const double v = y[(b * 3 + c) * 25 + i];
        s += v;
        s2 += v * v;
      }
    EXPECT_NEAR(s / 100, 0.0, 1e-12);
    EXPECT_NEAR(s2 / 100, 1.0, 1e-12);
  }
}

TEST(BatchNorm, RunningStatisticsUseMomentumAndUnbiasedVariance) {
  NormBuffers<double> buf(1);
  const Tensor64 x({2, 1, 1, 2}, {1, 2, 3, 6});  // mean 3, biased var 3.5, unbiased 14/3
  batch_norm(x, Tensor64::full({1}, 1), Tensor64::zeros({1}), buf, Mode::train);
  EXPECT_NEAR(buf.running_mean[0], 0.3, 1e-12);
  EXPECT_NEAR(buf.running_var[0], 0.9 + 0.1 * 14.0 / 3.0, 1e-12);
}

TEST(BatchNorm, EvalUsesRunningStatisticsAndLeavesThemAlone) {
  NormBuffers<double> buf(1);
  buf.running_mean = {1.0};
  buf.running_var = {4.0};
  const Tensor64 x({1, 1, 1, 2}, {3, 5});
  const auto y = batch_norm(x, Tensor64::full({1}, 2), Tensor64::full({1}, 1), buf, Mode::eval, 0.1, 0.0);
  EXPECT_NEAR(y[0], 2 * (3 - 1) / 2.0 + 1, 1e-12);
  EXPECT_NEAR(y[1], 2 * (5 - 1) / 2.0 + 1, 1e-12);
  EXPECT_EQ(buf.running_mean[0], 1.0);
  EXPECT_EQ(buf.running_var[0], 4.0);
}

TEST(InstanceNorm, EachItemChannelNormalizedSeparately) {
  std::mt19937_64 rng(3);
  const auto x = random_tensor<double>({2, 2, 3, 3}, rng, 0, 10);
  const auto y = instance_norm(x, Tensor64::full({2}, 1), Tensor64::zeros({2}), 0.0);
  for (std::size_t n = 0; n < 4; ++n) {
    double s = 0, s2 = 0;
    for (std::size_t i = 0; i < 9; ++i) {
      s += y[n * 9 + i];
      s2 += y[n * 9 + i] * y[n * 9 + i];
    }
    EXPECT_NEAR(s / 9, 0.0, 1e-12);
    EXPECT_NEAR(s2 / 9, 1.0, 1e-12);
  }
}

TEST(Norm, AffineShapeMismatchIsShapeError) {
  NormBuffers<float> buf(2);
  EXPECT_THROW(batch_norm(Tensor::zeros({1, 2, 2, 2}), Tensor::zeros({3}), Tensor::zeros({2}), buf, Mode::train),
               ShapeError);
  EXPECT_THROW(instance_norm(Tensor::zeros({2, 2, 2}), Tensor::zeros({2}), Tensor::zeros({2})), ShapeError);
}

TEST(Dropout, RateZeroIsIdentityInBothModes) {
  std::mt19937_64 rng(4);
  const auto x = random_tensor<float>({2, 3, 4}, rng);
  for (Mode m : {Mode::train, Mode::eval}) {
    const auto y = dropout(x, 0.0, m, 99);
    EXPECT_TRUE(std::equal(x.values().begin(), x.values().end(), y.values().begin()));
  }
}

TEST(Dropout, EvalModeIsIdentity) {
  std::mt19937_64 rng(5);
  const auto x = random_tensor<float>({50}, rng);
  const auto y = dropout(x, 0.5, Mode::eval, 1);
  EXPECT_TRUE(std::equal(x.values().begin(), x.values().end(), y.values().begin()));
}

TEST(Dropout, SeededMaskZeroesExactlyMaskedAndDoublesSurvivors) {
  std::mt19937_64 rng(6);
  const auto x = random_tensor<float>({1000}, rng, 0.5, 1.5);
  const auto y = dropout(x, 0.5, Mode::train, 1234);
  const auto keep = dropout_mask(x.numel(), 0.5, 1234);
  std::size_t kept = 0;
  for (std::size_t i = 0; i < x.numel(); ++i) {
    if (keep[i]) {
      EXPECT_EQ(y[i], x[i] * 2.0F);
      ++kept;
    } else {
      EXPECT_EQ(y[i], 0.0F);
    }
  }
  EXPECT_GT(kept, 400U);
  EXPECT_LT(kept, 600U);
  const auto again = dropout(x, 0.5, Mode::train, 1234);
  EXPECT_TRUE(std::equal(y.values().begin(), y.values().end(), again.values().begin()));
  const auto other = dropout(x, 0.5, Mode::train, 1235);
  EXPECT_FALSE(std::equal(y.values().begin(), y.values().end(), other.values().begin()));
}

TEST(Dropout, InvalidRateIsConfigError) {
  EXPECT_THROW(dropout(Tensor::zeros({2}), 1.0, Mode::train, 0), ConfigError);
  EXPECT_THROW(dropout(Tensor::zeros({2}), -0.1, Mode::train, 0), ConfigError);
}
