#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "support.hpp"

using namespace inkgan;
using testing_support::random_tensor;

TEST(DLoss, ZeroLogitsGiveTwoLn2) {
  EXPECT_NEAR(d_loss(Tensor::zeros({1, 1, 3, 3}), Tensor::zeros({1, 1, 3, 3})).item(), 2 * std::log(2.0), 1e-6);
}

TEST(DLoss, PerfectDiscriminatorNearZero) {
  EXPECT_LT(d_loss(Tensor::full({2, 1, 2, 2}, 30), Tensor::full({2, 1, 2, 2}, -30)).item(), 1e-9);
}

TEST(DLoss, ShapeMismatchRejected) {
  EXPECT_THROW(d_loss(Tensor::zeros({1, 1, 2, 2}), Tensor::zeros({1, 1, 3, 3})), ShapeError);
}

TEST(DLoss, MatchesProbabilityForm) {
  std::mt19937_64 rng(1);
  const auto r = random_tensor<double>({2, 1, 3, 3}, rng, -4, 4), f = random_tensor<double>({2, 1, 3, 3}, rng, -4, 4);
  double expect = 0;
  for (std::size_t i = 0; i < r.numel(); ++i) {
    expect -= std::log(1 / (1 + std::exp(-r[i]))) / 18.0;
    expect -= std::log(1 - 1 / (1 + std::exp(-f[i]))) / 18.0;
  }
  EXPECT_NEAR(d_loss(r, f).item(), expect, 1e-12);
}

TEST(GAdvLoss, ZeroLogitsGiveLn2) { EXPECT_NEAR(g_adv_loss(Tensor::zeros({1, 1, 2, 2})).item(), std::log(2.0), 1e-6); }

TEST(GAdvLoss, FooledDiscriminatorNearZero) { EXPECT_LT(g_adv_loss(Tensor::full({1, 1, 2, 2}, 30)).item(), 1e-9); }

TEST(GAdvLoss, MonotoneDecreasingInEachLogit) {
  std::mt19937_64 rng(2);
  for (int t = 0; t < 50; ++t) {
    auto z = random_tensor<double>({1, 1, 2, 2}, rng, -5, 5);
    const double before = g_adv_loss(z).item();
    std::vector<double> v(z.values().begin(), z.values().end());
    v[static_cast<std::size_t>(t % 4)] += 0.5;
    EXPECT_LE(g_adv_loss(Tensor64(z.shape(), v)).item(), before);
  }
}

TEST(L1Loss, Examples) {
  EXPECT_EQ(l1_loss(Tensor({1, 2}, {1, -1}), Tensor::zeros({1, 2})).item(), 1.0F);
  std::mt19937_64 rng(3);
  const auto a = random_tensor<float>({2, 3, 4, 4}, rng), b = random_tensor<float>({2, 3, 4, 4}, rng);
  EXPECT_EQ(l1_loss(a, a).item(), 0.0F);
  EXPECT_EQ(l1_loss(a, b).item(), l1_loss(b, a).item());
  EXPECT_THROW(l1_loss(a, Tensor::zeros({2, 3, 4, 3})), ShapeError);
}

TEST(TvLoss, Examples) {
  EXPECT_EQ(tv_loss(Tensor::full({2, 3, 5, 5}, 0.7F)).item(), 0.0F);
  EXPECT_EQ(tv_loss(Tensor({1, 1, 2, 2}, {0, 1, 2, 3})).item(), 6.0F);
  EXPECT_EQ(tv_loss(Tensor({1, 1, 1, 1}, {5})).item(), 0.0F);
}

TEST(TvLoss, MirrorInvariant) {
  std::mt19937_64 rng(4);
  for (int t = 0; t < 20; ++t) {
    const auto x = random_tensor<double>({2, 3, 5, 6}, rng);
    std::vector<double> m(x.numel());
    for (std::size_t n = 0; n < 6; ++n)
      for (std::size_t i = 0; i < 5; ++i)
        for (std::size_t j = 0; j < 6; ++j) m[(n * 5 + i) * 6 + j] = x[(n * 5 + i) * 6 + (5 - j)];
    EXPECT_NEAR(tv_loss(x).item(), tv_loss(Tensor64(x.shape(), m)).item(), 1e-12);
  }
}

TEST(TvLoss, MeanReductionDividesByElementCount) {
  const Tensor64 x({1, 1, 2, 2}, {0, 1, 2, 3});
  EXPECT_DOUBLE_EQ(tv_loss(x, TvReduction::mean).item(), 6.0 / 4.0);
}

TEST(TvLoss, RequiresRank4) { EXPECT_THROW(tv_loss(Tensor::zeros({4, 4})), ShapeError); }

TEST(CycleLoss, Examples) {
  std::mt19937_64 rng(5);
  const auto x = random_tensor<float>({1, 3, 4, 4}, rng), y = random_tensor<float>({1, 3, 4, 4}, rng);
  EXPECT_EQ(cycle_loss(x, x, y, y).item(), 0.0F);
  EXPECT_NEAR(cycle_loss(x, x, y, add_scalar(y, 0.5F)).item(), 0.5F, 1e-6);
  const auto a = random_tensor<float>({1, 3, 4, 4}, rng), b = random_tensor<float>({1, 3, 4, 4}, rng);
  EXPECT_GE(cycle_loss(x, a, y, b).item(), 0.0F);
}

TEST(Pix2PixLoss, DefaultWeightsDecompose) {
  std::mt19937_64 rng(6);
  const auto logits = random_tensor<double>({2, 1, 3, 3}, rng, -2, 2);
  const auto y = random_tensor<double>({2, 3, 8, 8}, rng), y_hat = random_tensor<double>({2, 3, 8, 8}, rng);
  LossConfig cfg;
  EXPECT_EQ(cfg.lambda_l1, 100.0);
  EXPECT_EQ(cfg.lambda_tv, 0.0001);
  EXPECT_EQ(cfg.lambda_cyc, 10.0);
  const double adv = g_adv_loss(logits).item(), l1 = l1_loss(y, y_hat).item(), tv = tv_loss(y_hat).item();
  EXPECT_NEAR(total_pix2pix(logits, y, y_hat, cfg).item(), adv + 100 * l1, 1e-12);
  cfg.objective = Objective::pix2pix_tv;
  EXPECT_NEAR(total_pix2pix(logits, y, y_hat, cfg).item(), adv + 100 * l1 + 0.0001 * tv, 1e-12);
}

TEST(Pix2PixLoss, ZeroWeightsLeaveAdversarialTerm) {
  std::mt19937_64 rng(7);
  const auto logits = random_tensor<double>({1, 1, 2, 2}, rng);
  const auto y = random_tensor<double>({1, 3, 4, 4}, rng), y_hat = random_tensor<double>({1, 3, 4, 4}, rng);
  LossConfig cfg;
  cfg.objective = Objective::pix2pix_tv;
  cfg.lambda_l1 = 0;
  cfg.lambda_tv = 0;
  EXPECT_EQ(total_pix2pix(logits, y, y_hat, cfg).item(), g_adv_loss(logits).item());
}

TEST(Pix2PixLoss, AffineInEachWeight) {
  std::mt19937_64 rng(8);
  const auto logits = random_tensor<double>({1, 1, 2, 2}, rng);
  const auto y = random_tensor<double>({1, 3, 6, 6}, rng), y_hat = random_tensor<double>({1, 3, 6, 6}, rng);
  LossConfig cfg;
  cfg.objective = Objective::pix2pix_tv;
  auto total = [&](double l1w, double tvw) {
    LossConfig c = cfg;
    c.lambda_l1 = l1w;
    c.lambda_tv = tvw;
    return total_pix2pix(logits, y, y_hat, c).item();
  };
  EXPECT_NEAR(total(100, 2e-4) - total(100, 0), 2 * (total(100, 1e-4) - total(100, 0)), 1e-12);
  EXPECT_NEAR(total(200, 1e-4) - total(0, 1e-4), 2 * (total(100, 1e-4) - total(0, 1e-4)), 1e-9);
}

TEST(Pix2PixLoss, CycleganObjectiveRejected) {
  LossConfig cfg;
  cfg.objective = Objective::cyclegan;
  EXPECT_THROW(total_pix2pix(Tensor::zeros({1, 1, 2, 2}), Tensor::zeros({1, 3, 2, 2}), Tensor::zeros({1, 3, 2, 2}), cfg),
               ConfigError);
}

TEST(LossConfig, TvEnabledExactlyForPix2PixTv) {
  LossConfig cfg;
  for (auto o : {Objective::pix2pix, Objective::pix2pix_tv, Objective::cyclegan}) {
    cfg.objective = o;
    EXPECT_EQ(cfg.tv_enabled(), o == Objective::pix2pix_tv);
  }
  cfg.lambda_l1 = -1;
  EXPECT_THROW(cfg.validate(), ConfigError);
  EXPECT_EQ(parse_objective("pix2pix_tv"), Objective::pix2pix_tv);
  EXPECT_THROW(parse_objective("pix2pixhd"), ConfigError);
}

TEST(Losses, NonNegativeAndFiniteOnRandomInputs) {
  std::mt19937_64 rng(9);
  for (int t = 0; t < 30; ++t) {
    const auto a = random_tensor<float>({2, 1, 3, 3}, rng, -20, 20), b = random_tensor<float>({2, 1, 3, 3}, rng, -20, 20);
    for (double v : {d_loss(a, b).item(), g_adv_loss(a).item(), l1_loss(a, b).item(), tv_loss(a).item()}) {
      EXPECT_GE(v, 0.0);
      EXPECT_TRUE(std::isfinite(v));
    }
  }
}
