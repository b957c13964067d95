#pragma once

// Training configuration and its plain-text `key = value` form, shared by
// config files, run directories and checkpoint metadata.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>

#include "inkgan/losses.hpp"
#include "inkgan/nets.hpp"
#include "inkgan/optim.hpp"

namespace inkgan {

using KeyValues = std::map<std::string, std::string>;

struct TrainConfig {
  LossConfig loss;
  AdamHyper adam;
  std::size_t epochs = 150;
  std::size_t batch_size = 32;
  std::size_t image_size = 256;
  std::uint64_t seed = 0;
  std::size_t checkpoint_every = 10;
  std::size_t sample_size = 100;
  bool augment = true;
  std::size_t d_steps = 1;
  std::size_t sketch_channels = 3;
  std::size_t unet_depth = 8;
  std::size_t unet_base_filters = 64;
  std::size_t unet_dropout_stages = 3;
  double unet_dropout_rate = 0.5;
  NormKind norm = NormKind::batch;
  std::size_t d_layers = 3;
  std::size_t d_base_filters = 64;
  std::size_t feature_dim = 64;
  std::uint64_t feature_seed = 1234;

  /// CPU-sized preset: 64x64 images, depth-4 / 16-filter networks, batch 8,
  /// 30 epochs. Full-scale values are the member defaults.
  static TrainConfig desk() {
    TrainConfig c;
    c.image_size = 64;
    c.unet_depth = 4;
    c.unet_base_filters = 16;
    c.unet_dropout_stages = 1;
    c.d_base_filters = 16;
    c.batch_size = 8;
    c.epochs = 30;
    c.sample_size = 20;
    c.checkpoint_every = 10;
    return c;
  }

  Objective objective() const { return loss.objective; }

  UNetConfig generator_config(std::size_t in_channels, std::size_t out_channels) const {
    UNetConfig u;
    u.in_channels = in_channels;
    u.out_channels = out_channels;
    u.base_filters = unet_base_filters;
    u.depth = unet_depth;
    u.dropout_stages = unet_dropout_stages;
    u.dropout_rate = unet_dropout_rate;
    u.norm = norm;
    return u;
  }

  PatchGANConfig discriminator_config(std::size_t in_channels) const {
    PatchGANConfig p;
    p.in_channels = in_channels;
    p.base_filters = d_base_filters;
    p.n_layers = d_layers;
    p.norm = norm;
    return p;
  }

  void validate() const {
    loss.validate();
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (image_size < 4) throw ConfigError("image_size must be >= 4");
    if (d_steps < 1) throw ConfigError("d_steps must be >= 1");
    if (sample_size < 2) throw ConfigError("sample_size must be >= 2");
    if (sketch_channels != 1 && sketch_channels != 3) throw ConfigError("sketch_channels must be 1 or 3");
    if (adam.alpha < 0 || adam.beta1 < 0 || adam.beta1 >= 1 || adam.beta2 < 0 || adam.beta2 >= 1 || adam.epsilon <= 0) {
      throw ConfigError("invalid Adam hyperparameters");
    }
    generator_config(sketch_channels, 3).validate();
    discriminator_config(sketch_channels + 3).validate();
    if (image_size % (std::size_t{1} << unet_depth) != 0) {
      throw ConfigError("image_size " + std::to_string(image_size) + " not divisible by 2^unet_depth");
    }
    patchgan_output_extent(discriminator_config(3), image_size);
  }
};

namespace detail {

inline std::string exact(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct Field {
  std::function<std::string(const TrainConfig&)> get;
  std::function<void(TrainConfig&, const std::string&)> set;
};

inline std::size_t parse_size(const std::string& key, const std::string& v) {
  std::size_t pos = 0;
  unsigned long long n = 0;
  try {
    if (!v.empty() && v[0] == '-') throw std::invalid_argument(v);
    n = std::stoull(v, &pos);
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': expected a non-negative integer, got '" + v + "'");
  }
  if (pos != v.size()) throw ConfigError("config key '" + key + "': expected a non-negative integer, got '" + v + "'");
  return static_cast<std::size_t>(n);
}

inline double parse_double(const std::string& key, const std::string& v) {
  std::size_t pos = 0;
  double d = 0;
  try {
    d = std::stod(v, &pos);
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': expected a number, got '" + v + "'");
  }
  if (pos != v.size()) throw ConfigError("config key '" + key + "': expected a number, got '" + v + "'");
  return d;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("config key '" + key + "': expected true or false, got '" + v + "'");
}

inline const std::map<std::string, Field>& train_fields() {
  using C = TrainConfig;
  auto size_field = [](const char* key, std::size_t C::*m) {
    return Field{[m](const C& c) { return std::to_string(c.*m); },
                 [key, m](C& c, const std::string& v) { c.*m = parse_size(key, v); }};
  };
  static const std::map<std::string, Field> fields = [&] {
    std::map<std::string, Field> f;
    f["objective"] = {[](const C& c) { return std::string(name(c.loss.objective)); },
                      [](C& c, const std::string& v) { c.loss.objective = parse_objective(v); }};
    f["lambda_l1"] = {[](const C& c) { return exact(c.loss.lambda_l1); },
                      [](C& c, const std::string& v) { c.loss.lambda_l1 = parse_double("lambda_l1", v); }};
    f["lambda_tv"] = {[](const C& c) { return exact(c.loss.lambda_tv); },
                      [](C& c, const std::string& v) { c.loss.lambda_tv = parse_double("lambda_tv", v); }};
    f["lambda_cyc"] = {[](const C& c) { return exact(c.loss.lambda_cyc); },
                       [](C& c, const std::string& v) { c.loss.lambda_cyc = parse_double("lambda_cyc", v); }};
    f["tv_reduction"] = {[](const C& c) { return std::string(c.loss.tv_reduction == TvReduction::sum ? "sum" : "mean"); },
                         [](C& c, const std::string& v) {
                           if (v != "sum" && v != "mean") throw ConfigError("tv_reduction must be sum or mean");
                           c.loss.tv_reduction = v == "sum" ? TvReduction::sum : TvReduction::mean;
                         }};
    f["lr"] = {[](const C& c) { return exact(c.adam.alpha); },
               [](C& c, const std::string& v) { c.adam.alpha = parse_double("lr", v); }};
    f["beta1"] = {[](const C& c) { return exact(c.adam.beta1); },
                  [](C& c, const std::string& v) { c.adam.beta1 = parse_double("beta1", v); }};
    f["beta2"] = {[](const C& c) { return exact(c.adam.beta2); },
                  [](C& c, const std::string& v) { c.adam.beta2 = parse_double("beta2", v); }};
    f["epsilon"] = {[](const C& c) { return exact(c.adam.epsilon); },
                    [](C& c, const std::string& v) { c.adam.epsilon = parse_double("epsilon", v); }};
    f["epochs"] = size_field("epochs", &C::epochs);
    f["batch_size"] = size_field("batch_size", &C::batch_size);
    f["image_size"] = size_field("image_size", &C::image_size);
    f["seed"] = {[](const C& c) { return std::to_string(c.seed); },
                 [](C& c, const std::string& v) { c.seed = parse_size("seed", v); }};
    f["checkpoint_every"] = size_field("checkpoint_every", &C::checkpoint_every);
    f["sample_size"] = size_field("sample_size", &C::sample_size);
    f["augment"] = {[](const C& c) { return std::string(c.augment ? "true" : "false"); },
                    [](C& c, const std::string& v) { c.augment = parse_bool("augment", v); }};
    f["d_steps"] = size_field("d_steps", &C::d_steps);
    f["sketch_channels"] = size_field("sketch_channels", &C::sketch_channels);
    f["unet_depth"] = size_field("unet_depth", &C::unet_depth);
    f["unet_base_filters"] = size_field("unet_base_filters", &C::unet_base_filters);
    f["unet_dropout_stages"] = size_field("unet_dropout_stages", &C::unet_dropout_stages);
    f["unet_dropout_rate"] = {[](const C& c) { return exact(c.unet_dropout_rate); },
                              [](C& c, const std::string& v) { c.unet_dropout_rate = parse_double("unet_dropout_rate", v); }};
    f["norm"] = {[](const C& c) { return std::string(name(c.norm)); },
                 [](C& c, const std::string& v) { c.norm = parse_norm_kind(v); }};
    f["d_layers"] = size_field("d_layers", &C::d_layers);
    f["d_base_filters"] = size_field("d_base_filters", &C::d_base_filters);
    f["feature_dim"] = size_field("feature_dim", &C::feature_dim);
    f["feature_seed"] = {[](const C& c) { return std::to_string(c.feature_seed); },
                         [](C& c, const std::string& v) { c.feature_seed = parse_size("feature_seed", v); }};
    return f;
  }();
  return fields;
}

}  // namespace detail

inline bool is_train_key(const std::string& key) { return detail::train_fields().count(key) != 0; }

inline KeyValues to_key_values(const TrainConfig& cfg) {
  KeyValues kv;
  for (const auto& [key, field] : detail::train_fields()) kv[key] = field.get(cfg);
  return kv;
}

/// Applies `kv` on top of `base`; unknown keys are rejected.
inline TrainConfig apply_key_values(TrainConfig base, const KeyValues& kv) {
  const auto& fields = detail::train_fields();
  for (const auto& [key, value] : kv) {
    auto it = fields.find(key);
    if (it == fields.end()) throw ConfigError("unknown config key '" + key + "'");
    it->second.set(base, value);
  }
  return base;
}

/// Parses `key = value` lines; `#` starts a comment. Later keys override
/// earlier ones.
inline KeyValues parse_key_values(const std::string& text, const std::string& origin = "config") {
  KeyValues kv;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected 'key = value'");
    }
    const auto key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
    kv[key] = trim(line.substr(eq + 1));
  }
  return kv;
}

inline KeyValues read_key_values(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_key_values(ss.str(), path.string());
}

inline std::string format_key_values(const KeyValues& kv) {
  std::string out;
  for (const auto& [k, v] : kv) out += k + " = " + v + "\n";
  return out;
}

}  // namespace inkgan
