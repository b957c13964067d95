#pragma once

// U-Net generator and PatchGAN discriminator builders.
//
// Both share one code path from desk scale (64x64, depth 4, 16 base filters)
// to full scale (256x256, depth 8, 64 base filters). Weights are drawn from
// N(0, 0.02) and norm scales from N(1, 0.02), all from the build seed.

#include <algorithm>
#include <cstdint>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include "inkgan/conv.hpp"
#include "inkgan/norm.hpp"
#include "inkgan/ops.hpp"
#include "inkgan/random.hpp"

namespace inkgan {

enum class NormKind { batch, instance, none };

inline const char* name(NormKind k) {
  switch (k) {
    case NormKind::batch: return "batch";
    case NormKind::instance: return "instance";
    case NormKind::none: return "none";
  }
  return "?";
}

inline NormKind parse_norm_kind(const std::string& s) {
  if (s == "batch") return NormKind::batch;
  if (s == "instance") return NormKind::instance;
  if (s == "none") return NormKind::none;
  throw ConfigError("unknown norm kind '" + s + "' (expected batch, instance or none)");
}

struct UNetConfig {
  std::size_t in_channels = 3;
  std::size_t out_channels = 3;
  std::size_t base_filters = 16;
  std::size_t depth = 4;
  // Innermost decoder stages that apply dropout; the outermost stage never does.
  std::size_t dropout_stages = 1;
  double dropout_rate = 0.5;
  NormKind norm = NormKind::batch;

  void validate() const {
    if (in_channels == 0 || out_channels == 0 || base_filters == 0) {
      throw ConfigError("unet: channel counts and base_filters must be positive");
    }
    if (depth < 1) throw ConfigError("unet: depth must be >= 1");
    if (dropout_stages > depth) {
      throw ConfigError("unet: dropout_stages (" + std::to_string(dropout_stages) + ") exceeds depth (" +
                        std::to_string(depth) + ")");
    }
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw ConfigError("unet: dropout_rate must be in [0, 1)");
  }

  /// Filters of encoder stage i (1-based): base * 2^(i-1), capped at 8 * base.
  std::size_t filters(std::size_t stage) const { return base_filters << std::min<std::size_t>(stage - 1, 3); }
};

struct PatchGANConfig {
  std::size_t in_channels = 6;
  std::size_t base_filters = 16;
  std::size_t n_layers = 3;
  NormKind norm = NormKind::batch;

  void validate() const {
    if (in_channels == 0 || base_filters == 0) throw ConfigError("patchgan: channel counts must be positive");
    if (n_layers < 1) throw ConfigError("patchgan: n_layers must be >= 1");
  }
};

/// 1x1 convolution with bias; a diagnostic generator for toy experiments.
struct PointwiseConfig {
  std::size_t channels = 3;
  bool identity_init = true;
};

struct ConvLayerSpec {
  std::size_t kernel, stride, pad;
};

/// The PatchGAN conv stack: n_layers stride-2 convs, then two stride-1 convs.
inline std::vector<ConvLayerSpec> patchgan_layers(const PatchGANConfig& cfg) {
  std::vector<ConvLayerSpec> layers(cfg.n_layers, ConvLayerSpec{4, 2, 1});
  layers.push_back({4, 1, 1});
  layers.push_back({4, 1, 1});
  return layers;
}

/// Input extent seen by one output unit, via r <- r * s + (k - s) from the top.
inline std::size_t receptive_field(const std::vector<ConvLayerSpec>& layers) {
  std::size_t r = 1;
  for (auto it = layers.rbegin(); it != layers.rend(); ++it) r = r * it->stride + (it->kernel - it->stride);
  return r;
}

inline std::size_t patchgan_output_extent(const PatchGANConfig& cfg, std::size_t input_extent) {
  std::size_t n = input_extent;
  for (const auto& l : patchgan_layers(cfg)) {
    if (n + 2 * l.pad < l.kernel) {
      throw ConfigError("patchgan: input extent " + std::to_string(input_extent) + " too small for " +
                        std::to_string(cfg.n_layers) + " layers");
    }
    n = conv_out_extent(n, l.kernel, l.stride, l.pad);
  }
  return n;
}

enum class NetKind { unet, patchgan, pointwise };

template <typename T>
struct BasicNetwork {
  NetKind kind = NetKind::unet;
  std::variant<UNetConfig, PatchGANConfig, PointwiseConfig> config;
  std::vector<NamedTensor<T>> params;
  std::map<std::string, NormBuffers<T>> buffers;
  Mode mode = Mode::train;

  BasicTensor<T>& param(const std::string& name) {
    for (auto& p : params) {
      if (p.name == name) return p.tensor;
    }
    throw UsageError("network has no parameter '" + name + "'");
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& p : params) n += p.tensor.numel();
    return n;
  }
};

using Network = BasicNetwork<float>;

namespace detail {

template <typename T>
class ParamFactory {
 public:
  ParamFactory(BasicNetwork<T>& net, std::uint64_t seed) : net_(net), rng_(seed) {}

  void normal(const std::string& name, Shape shape, double mean, double stddev) {
    std::normal_distribution<double> dist(mean, stddev);
    std::vector<T> v(numel(shape));
    for (auto& x : v) x = static_cast<T>(dist(rng_));
    add(name, BasicTensor<T>(std::move(shape), std::move(v)));
  }
  void constant(const std::string& name, Shape shape, T value) { add(name, BasicTensor<T>::full(std::move(shape), value)); }

  void norm(const std::string& prefix, std::size_t channels, NormKind kind) {
    if (kind == NormKind::none) return;
    normal(prefix + ".gamma", {channels}, 1.0, 0.02);
    constant(prefix + ".beta", {channels}, T(0));
    if (kind == NormKind::batch) net_.buffers.emplace(prefix, NormBuffers<T>(channels));
  }

 private:
  void add(const std::string& name, BasicTensor<T> t) {
    for (const auto& p : net_.params) {
      if (p.name == name) throw UsageError("duplicate parameter name '" + name + "'");
    }
    t.set_requires_grad(true);
    net_.params.push_back({name, std::move(t)});
  }

  BasicNetwork<T>& net_;
  Rng rng_;
};

template <typename T>
BasicTensor<T> apply_norm(BasicNetwork<T>& net, const std::string& prefix, NormKind kind, const BasicTensor<T>& x,
                          Mode mode) {
  switch (kind) {
    case NormKind::none: return x;
    case NormKind::instance: return instance_norm(x, net.param(prefix + ".gamma"), net.param(prefix + ".beta"));
    case NormKind::batch:
      return batch_norm(x, net.param(prefix + ".gamma"), net.param(prefix + ".beta"), net.buffers.at(prefix), mode);
  }
  return x;
}

template <typename T>
void require_channels(const BasicTensor<T>& x, std::size_t channels, const char* what) {
  if (x.rank() != 4 || x.dim(1) != channels) {
    throw ShapeError(std::string(what) + " expects [B," + std::to_string(channels) + ",H,W] input, got " +
                     to_string(x.shape()));
  }
}

template <typename T>
BasicTensor<T> unet_forward(BasicNetwork<T>& net, const UNetConfig& cfg, const BasicTensor<T>& x, Mode mode,
                            std::uint64_t seed) {
  require_channels(x, cfg.in_channels, "unet");
  const std::size_t factor = std::size_t{1} << cfg.depth;
  if (x.dim(2) % factor != 0 || x.dim(3) % factor != 0) {
    throw ConfigError("unet: input extent " + std::to_string(x.dim(2)) + "x" + std::to_string(x.dim(3)) +
                      " not divisible by 2^depth = " + std::to_string(factor));
  }
  std::vector<BasicTensor<T>> skips;
  BasicTensor<T> h = x;
  for (std::size_t i = 1; i <= cfg.depth; ++i) {
    const std::string p = "enc" + std::to_string(i);
    h = conv2d(h, net.param(p + ".weight"), 2, 1);
    if (i > 1) h = apply_norm(net, p, cfg.norm, h, mode);
    h = leaky_relu(h, T(0.2));
    skips.push_back(h);
  }
  for (std::size_t i = cfg.depth; i >= 2; --i) {
    const std::string p = "dec" + std::to_string(i);
    h = conv2d_transpose(h, net.param(p + ".weight"), 2, 1);
    h = apply_norm(net, p, cfg.norm, h, mode);
    if (cfg.depth - i < cfg.dropout_stages) h = dropout(h, cfg.dropout_rate, mode, derive_seed(seed, {i}));
    h = relu(h);
    h = concat<T>({h, skips[i - 2]}, 1);
  }
  h = conv2d_transpose(h, net.param("dec1.weight"), 2, 1);
  h = bias_add(h, net.param("dec1.bias"));
  return tanh(h);
}

template <typename T>
BasicTensor<T> patchgan_forward(BasicNetwork<T>& net, const PatchGANConfig& cfg, const BasicTensor<T>& x, Mode mode) {
  require_channels(x, cfg.in_channels, "patchgan");
  const auto layers = patchgan_layers(cfg);
  patchgan_output_extent(cfg, std::min(x.dim(2), x.dim(3)));
  BasicTensor<T> h = x;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const std::string p = "conv" + std::to_string(i + 1);
    h = conv2d(h, net.param(p + ".weight"), layers[i].stride, layers[i].pad);
    const bool last = i + 1 == layers.size();
    if (i == 0 || last) h = bias_add(h, net.param(p + ".bias"));
    if (last) break;
    if (i > 0) h = apply_norm(net, p, cfg.norm, h, mode);
    h = leaky_relu(h, T(0.2));
  }
  return h;
}

}  // namespace detail

/// U-Net: encoder stage i is conv(4x4, s2) -> norm (not on stage 1) ->
/// leaky_relu(0.2); decoder stage i is conv_transpose(4x4, s2) -> norm ->
/// dropout (innermost `dropout_stages`) -> relu, concatenated with the mirrored
/// encoder output; the outermost decoder stage ends in bias + tanh.
template <typename T = float>
BasicNetwork<T> build_unet(const UNetConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  BasicNetwork<T> net;
  net.kind = NetKind::unet;
  net.config = cfg;
  detail::ParamFactory<T> make(net, seed);
  std::size_t prev = cfg.in_channels;
  for (std::size_t i = 1; i <= cfg.depth; ++i) {
    const std::string p = "enc" + std::to_string(i);
    make.normal(p + ".weight", {cfg.filters(i), prev, 4, 4}, 0.0, 0.02);
    if (i > 1) make.norm(p, cfg.filters(i), cfg.norm);
    prev = cfg.filters(i);
  }
  for (std::size_t i = cfg.depth; i >= 2; --i) {
    const std::string p = "dec" + std::to_string(i);
    const std::size_t in = i == cfg.depth ? cfg.filters(i) : 2 * cfg.filters(i);
    make.normal(p + ".weight", {in, cfg.filters(i - 1), 4, 4}, 0.0, 0.02);
    make.norm(p, cfg.filters(i - 1), cfg.norm);
  }
  const std::size_t in = cfg.depth == 1 ? cfg.filters(1) : 2 * cfg.filters(1);
  make.normal("dec1.weight", {in, cfg.out_channels, 4, 4}, 0.0, 0.02);
  make.constant("dec1.bias", {cfg.out_channels}, T(0));
  return net;
}

/// PatchGAN: n_layers 4x4 stride-2 convs (base, 2 base, 4 base, ... capped at
/// 8 base) with leaky_relu(0.2) and norm from layer 2, a 4x4 stride-1 conv, and
/// a final 4x4 stride-1 conv to one logit channel. No sigmoid.
template <typename T = float>
BasicNetwork<T> build_patchgan(const PatchGANConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  BasicNetwork<T> net;
  net.kind = NetKind::patchgan;
  net.config = cfg;
  detail::ParamFactory<T> make(net, seed);
  auto width = [&](std::size_t layer) { return cfg.base_filters << std::min<std::size_t>(layer, 3); };
  std::size_t prev = cfg.in_channels;
  for (std::size_t i = 0; i <= cfg.n_layers; ++i) {
    const std::string p = "conv" + std::to_string(i + 1);
    make.normal(p + ".weight", {width(i), prev, 4, 4}, 0.0, 0.02);
    if (i == 0) {
      make.constant(p + ".bias", {width(i)}, T(0));
    } else {
      make.norm(p, width(i), cfg.norm);
    }
    prev = width(i);
  }
  const std::string p = "conv" + std::to_string(cfg.n_layers + 2);
  make.normal(p + ".weight", {1, prev, 4, 4}, 0.0, 0.02);
  make.constant(p + ".bias", {1}, T(0));
  return net;
}

template <typename T = float>
BasicNetwork<T> build_pointwise(const PointwiseConfig& cfg, std::uint64_t seed) {
  BasicNetwork<T> net;
  net.kind = NetKind::pointwise;
  net.config = cfg;
  detail::ParamFactory<T> make(net, seed);
  make.normal("conv.weight", {cfg.channels, cfg.channels, 1, 1}, 0.0, 0.02);
  make.constant("conv.bias", {cfg.channels}, T(0));
  if (cfg.identity_init) {
    auto w = net.param("conv.weight").mutable_values();
    for (std::size_t c = 0; c < cfg.channels; ++c) w[c * cfg.channels + c] += T(1);
  }
  return net;
}

/// Runs the network. Train mode uses batch statistics and draws dropout masks
/// from `seed`, which is how the generator realizes its noise input.
template <typename T>
BasicTensor<T> forward(BasicNetwork<T>& net, const BasicTensor<T>& input, Mode mode, std::uint64_t seed = 0) {
  switch (net.kind) {
    case NetKind::unet: return detail::unet_forward(net, std::get<UNetConfig>(net.config), input, mode, seed);
    case NetKind::patchgan: return detail::patchgan_forward(net, std::get<PatchGANConfig>(net.config), input, mode);
    case NetKind::pointwise: {
      const auto& cfg = std::get<PointwiseConfig>(net.config);
      detail::require_channels(input, cfg.channels, "pointwise");
      return bias_add(conv2d(input, net.param("conv.weight"), 1, 0), net.param("conv.bias"));
    }
  }
  throw UsageError("unknown network kind");
}

template <typename T>
BasicTensor<T> forward(BasicNetwork<T>& net, const BasicTensor<T>& input, std::uint64_t seed = 0) {
  return forward(net, input, net.mode, seed);
}

}  // namespace inkgan
