#include <gtest/gtest.h>

#include <random>
#include <set>

#include "support.hpp"

using namespace inkgan;
using testing_support::random_tensor;

namespace {

UNetConfig small_unet(std::size_t in, std::size_t out, std::size_t depth) {
  UNetConfig c;
  c.in_channels = in;
  c.out_channels = out;
  c.depth = depth;
  c.base_filters = 4;
  c.dropout_stages = 1;
  return c;
}

bool same_values(const Tensor& a, const Tensor& b) {
  return a.shape() == b.shape() && std::equal(a.values().begin(), a.values().end(), b.values().begin());
}

}  // namespace

TEST(UNet, Depth6OutputShapeAndRange) {
  auto net = build_unet(small_unet(1, 3, 6), 1);
  std::mt19937_64 rng(1);
  const auto x = random_tensor<float>({1, 1, 64, 64}, rng);
  const auto y = forward(net, x, Mode::train, 3);
  EXPECT_EQ(y.shape(), (Shape{1, 3, 64, 64}));
  for (float v : y.values()) {
    EXPECT_GE(v, -1.0F);
    EXPECT_LE(v, 1.0F);
  }
}

TEST(UNet, BottleneckExtentIsOneAtDepth6) {
  // Six stride-2 encoder convolutions take 64 to 1.
  std::size_t extent = 64;
  for (int i = 0; i < 6; ++i) extent = conv_out_extent(extent, 4, 2, 1);
  EXPECT_EQ(extent, 1U);
  auto net = build_unet(small_unet(1, 3, 6), 1);
  EXPECT_EQ(net.param("enc6.weight").dim(0), small_unet(1, 3, 6).filters(6));
}

TEST(UNet, SameSeedSameParameters) {
  const auto a = build_unet(small_unet(3, 3, 4), 42), b = build_unet(small_unet(3, 3, 4), 42);
  const auto c = build_unet(small_unet(3, 3, 4), 43);
  ASSERT_EQ(a.params.size(), b.params.size());
  bool any_diff = false;
  for (std::size_t i = 0; i < a.params.size(); ++i) {
    EXPECT_EQ(a.params[i].name, b.params[i].name);
    EXPECT_TRUE(same_values(a.params[i].tensor, b.params[i].tensor));
    any_diff = any_diff || !same_values(a.params[i].tensor, c.params[i].tensor);
  }
  EXPECT_TRUE(any_diff);
}

TEST(UNet, ParameterNamesUnique) {
  const auto net = build_unet(small_unet(3, 3, 5), 1);
  std::set<std::string> names;
  for (const auto& p : net.params) EXPECT_TRUE(names.insert(p.name).second) << p.name;
}

TEST(UNet, IndivisibleExtentIsConfigError) {
  auto net = build_unet(small_unet(1, 3, 4), 1);
  EXPECT_THROW(forward(net, Tensor::zeros({1, 1, 24, 24}), Mode::eval), ConfigError);
}

TEST(UNet, InvalidConfigRejected) {
  auto c = small_unet(1, 3, 0);
  EXPECT_THROW(build_unet(c, 1), ConfigError);
  c = small_unet(1, 3, 3);
  c.dropout_stages = 4;
  EXPECT_THROW(build_unet(c, 1), ConfigError);
}

TEST(UNet, ChannelMismatchIsShapeError) {
  auto net = build_unet(small_unet(3, 3, 3), 1);
  EXPECT_THROW(forward(net, Tensor::zeros({1, 1, 16, 16}), Mode::eval), ShapeError);
}

TEST(UNet, EvalForwardDeterministic) {
  auto net = build_unet(small_unet(3, 3, 4), 5);
  std::mt19937_64 rng(2);
  const auto x = random_tensor<float>({2, 3, 32, 32}, rng);
  EXPECT_TRUE(same_values(forward(net, x, Mode::eval, 1), forward(net, x, Mode::eval, 2)));
}

TEST(UNet, TrainModeDropoutSeedChangesOutput) {
  auto net = build_unet(small_unet(3, 3, 4), 5);
  std::mt19937_64 rng(3);
  const auto x = random_tensor<float>({2, 3, 32, 32}, rng);
  const auto a = forward(net, x, Mode::train, 1);
  const auto b = forward(net, x, Mode::train, 2);
  const auto a2 = forward(net, x, Mode::train, 1);
  EXPECT_FALSE(same_values(a, b));
  EXPECT_TRUE(same_values(a, a2));
}

TEST(UNet, FloatGradientMatchesFiniteDifferencesOnSampledParameters) {
  // 32-bit end-to-end check on a 16x16 toy: scalar mean of G's output w.r.t.
  // about 1% of each parameter tensor (at least one entry).
  auto cfg = small_unet(3, 3, 3);
  cfg.dropout_stages = 0;
  auto net = build_unet(cfg, 11);
  std::mt19937_64 rng(4);
  const auto x = random_tensor<float>({2, 3, 16, 16}, rng);
  for (auto& p : net.params) p.tensor.zero_grad();
  backward(mean(forward(net, x, Mode::train)));
  // The forward pass runs in 32-bit; only the final averaging is done in
  // double so the difference quotient is not dominated by summation error.
  auto objective = [&] {
    const auto y = forward(net, x, Mode::train);
    double total = 0;
    for (float v : y.values()) total += v;
    return total / static_cast<double>(y.numel());
  };
  std::vector<double> analytic, numeric;
  for (auto& p : net.params) {
    const std::size_t n = p.tensor.numel();
    const std::size_t count = std::max<std::size_t>(1, n / 100);
    for (std::size_t s = 0; s < count; ++s) {
      const std::size_t i = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
      const float saved = p.tensor.values()[i];
      const float h = 2e-3F;
      double fp, fm;
      {
        NoGradGuard guard;
        p.tensor.mutable_values()[i] = saved + h;
        fp = objective();
        p.tensor.mutable_values()[i] = saved - h;
        fm = objective();
        p.tensor.mutable_values()[i] = saved;
      }
      analytic.push_back(p.tensor.grad()[i]);
      numeric.push_back((fp - fm) / (2.0 * h));
    }
  }
  double d2 = 0, a2 = 0, n2 = 0;
  for (std::size_t k = 0; k < analytic.size(); ++k) {
    d2 += (analytic[k] - numeric[k]) * (analytic[k] - numeric[k]);
    a2 += analytic[k] * analytic[k];
    n2 += numeric[k] * numeric[k];
  }
  const double rel = std::sqrt(d2) / std::max(std::sqrt(a2), std::sqrt(n2));
  EXPECT_GT(analytic.size(), 10U);
  EXPECT_LT(rel, 1e-2);
}

TEST(PatchGAN, Input256Gives30x30) {
  PatchGANConfig c;
  c.in_channels = 4;
  c.base_filters = 4;
  auto net = build_patchgan(c, 1);
  const auto y = forward(net, Tensor::zeros({1, 4, 256, 256}), Mode::eval);
  EXPECT_EQ(y.shape(), (Shape{1, 1, 30, 30}));
}

TEST(PatchGAN, ReceptiveFieldIs70) {
  PatchGANConfig c;
  c.n_layers = 3;
  EXPECT_EQ(receptive_field(patchgan_layers(c)), 70U);
}

TEST(PatchGAN, SeventyPixelInputShapeFollowsConvFormula) {
  // 70 -> 35 -> 17 -> 8 (stride 2) -> 7 -> 6 (stride 1).
  PatchGANConfig c;
  c.in_channels = 4;
  c.base_filters = 4;
  EXPECT_EQ(patchgan_output_extent(c, 70), 6U);
  auto net = build_patchgan(c, 1);
  const auto y = forward(net, Tensor::zeros({1, 4, 70, 70}), Mode::eval);
  EXPECT_EQ(y.shape(), (Shape{1, 1, 6, 6}));
}

TEST(PatchGAN, OutputExtentFollowsComposedFormula) {
  for (std::size_t layers = 1; layers <= 4; ++layers) {
    for (std::size_t n = 16; n <= 96; n += 8) {
      PatchGANConfig c;
      c.n_layers = layers;
      std::size_t e = n;
      bool ok = true;
      for (const auto& l : patchgan_layers(c)) {
        if (e + 2 * l.pad < l.kernel) {
          ok = false;
          break;
        }
        e = (e + 2 * l.pad - l.kernel) / l.stride + 1;
      }
      if (ok) {
        EXPECT_EQ(patchgan_output_extent(c, n), e);
      } else {
        EXPECT_THROW(patchgan_output_extent(c, n), ConfigError);
      }
    }
  }
}

TEST(PatchGAN, ConditionalInputsDistinguishRealFromNegated) {
  PatchGANConfig c;
  c.in_channels = 6;
  c.base_filters = 4;
  auto net = build_patchgan(c, 9);
  std::mt19937_64 rng(5);
  const auto x = random_tensor<float>({1, 3, 64, 64}, rng), y = random_tensor<float>({1, 3, 64, 64}, rng);
  const auto real = forward(net, concat<float>({x, y}), Mode::eval);
  const auto neg = forward(net, concat<float>({x, scalar_mul(y, -1.0F)}), Mode::eval);
  EXPECT_FALSE(same_values(real, neg));
}

TEST(PatchGAN, ChannelMismatchIsShapeError) {
  PatchGANConfig c;
  c.in_channels = 6;
  auto net = build_patchgan(c, 1);
  EXPECT_THROW(forward(net, Tensor::zeros({1, 3, 64, 64}), Mode::eval), ShapeError);
}

TEST(Networks, BatchNormBuffersUpdateOnlyInTrainMode) {
  auto net = build_unet(small_unet(3, 3, 3), 2);
  ASSERT_FALSE(net.buffers.empty());
  std::mt19937_64 rng(6);
  const auto x = random_tensor<float>({2, 3, 16, 16}, rng);
  const auto before = net.buffers.begin()->second.running_mean;
  forward(net, x, Mode::eval);
  EXPECT_EQ(net.buffers.begin()->second.running_mean, before);
  forward(net, x, Mode::train);
  EXPECT_NE(net.buffers.begin()->second.running_mean, before);
}

TEST(Networks, InstanceNormVariantHasNoBuffers) {
  auto cfg = small_unet(3, 3, 3);
  cfg.norm = NormKind::instance;
  auto net = build_unet(cfg, 2);
  EXPECT_TRUE(net.buffers.empty());
  std::mt19937_64 rng(7);
  EXPECT_EQ(forward(net, random_tensor<float>({1, 3, 16, 16}, rng), Mode::train).shape(), (Shape{1, 3, 16, 16}));
}

TEST(Pointwise, IdentityInitIsNearIdentity) {
  PointwiseConfig c;
  auto net = build_pointwise(c, 1);
  std::mt19937_64 rng(8);
  const auto x = random_tensor<float>({2, 3, 4, 4}, rng);
  const auto y = forward(net, x, Mode::eval);
  ASSERT_EQ(y.shape(), x.shape());
  for (std::size_t i = 0; i < x.numel(); ++i) EXPECT_NEAR(y[i], x[i], 0.2);
  c.identity_init = false;
  auto plain = build_pointwise(c, 1);
  EXPECT_GT(std::abs(forward(plain, x, Mode::eval)[0] - x[0]), 0.5 * std::abs(x[0]));
}
