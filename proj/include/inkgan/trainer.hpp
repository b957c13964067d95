#pragma once

// Adversarial training loops, per-epoch evaluation, run-directory artifacts,
// checkpoint round-tripping of the full training state, and inference.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "inkgan/checkpoint.hpp"
#include "inkgan/config.hpp"
#include "inkgan/data.hpp"
#include "inkgan/losses.hpp"
#include "inkgan/metrics.hpp"
#include "inkgan/nets.hpp"
#include "inkgan/optim.hpp"

namespace inkgan {

struct StepLosses {
  double d_loss = 0;
  double g_adv = 0;
  double l1 = 0;
  double tv = 0;
  double cycle = 0;
  double g_total = 0;

  StepLosses& operator+=(const StepLosses& o) {
    d_loss += o.d_loss;
    g_adv += o.g_adv;
    l1 += o.l1;
    tv += o.tv;
    cycle += o.cycle;
    g_total += o.g_total;
    return *this;
  }
};

/// Everything needed to continue training bit-identically.
struct GanState {
  TrainConfig config;
  std::map<std::string, Network> nets;
  std::map<std::string, AdamState> opts;
  std::size_t epoch = 0;  // completed epochs

  Network& net(const std::string& name) {
    auto it = nets.find(name);
    if (it == nets.end()) throw UsageError("training state has no network '" + name + "'");
    return it->second;
  }
  AdamState& opt(const std::string& name) {
    auto it = opts.find(name);
    if (it == opts.end()) throw UsageError("training state has no optimizer for '" + name + "'");
    return it->second;
  }
};

inline GanState make_state(const TrainConfig& cfg) {
  cfg.validate();
  GanState s;
  s.config = cfg;
  const std::size_t sc = cfg.sketch_channels;
  if (cfg.objective() == Objective::cyclegan) {
    s.nets.emplace("G", build_unet(cfg.generator_config(sc, 3), derive_seed(cfg.seed, {1})));
    s.nets.emplace("F", build_unet(cfg.generator_config(3, sc), derive_seed(cfg.seed, {2})));
    s.nets.emplace("D_Y", build_patchgan(cfg.discriminator_config(3), derive_seed(cfg.seed, {3})));
    s.nets.emplace("D_X", build_patchgan(cfg.discriminator_config(sc), derive_seed(cfg.seed, {4})));
  } else {
    s.nets.emplace("G", build_unet(cfg.generator_config(sc, 3), derive_seed(cfg.seed, {1})));
    s.nets.emplace("D", build_patchgan(cfg.discriminator_config(sc + 3), derive_seed(cfg.seed, {3})));
  }
  for (auto& [name, n] : s.nets) s.opts.emplace(name, make_adam_state(n.params, cfg.adam));
  return s;
}

// ---------------------------------------------------------------------------
// Checkpoint mapping

inline Checkpoint to_checkpoint(const GanState& s) {
  Checkpoint c;
  for (const auto& [k, v] : to_key_values(s.config)) c.metadata["config." + k] = v;
  c.metadata["epoch"] = std::to_string(s.epoch);
  std::string names;
  for (const auto& [name, net] : s.nets) {
    names += (names.empty() ? "" : ",") + name;
    for (const auto& p : net.params) c.tensors.emplace(name + "/" + p.name, p.tensor.clone());
    for (const auto& [bname, b] : net.buffers) {
      const Shape shape{b.running_mean.size()};
      c.tensors.emplace(name + "/" + bname + ".running_mean", Tensor(shape, b.running_mean));
      c.tensors.emplace(name + "/" + bname + ".running_var", Tensor(shape, b.running_var));
    }
    const auto& opt = s.opts.at(name);
    c.metadata["opt." + name + ".step"] = std::to_string(opt.step);
    for (std::size_t i = 0; i < net.params.size(); ++i) {
      const auto& p = net.params[i];
      c.tensors.emplace("opt/" + name + "/m/" + p.name, Tensor(p.tensor.shape(), opt.m[i]));
      c.tensors.emplace("opt/" + name + "/v/" + p.name, Tensor(p.tensor.shape(), opt.v[i]));
    }
  }
  c.metadata["networks"] = names;
  return c;
}

inline TrainConfig config_from_checkpoint(const Checkpoint& c) {
  KeyValues kv;
  for (const auto& [k, v] : c.metadata) {
    if (k.rfind("config.", 0) == 0) kv[k.substr(7)] = v;
  }
  return apply_key_values(TrainConfig{}, kv);
}

inline GanState state_from_checkpoint(const Checkpoint& c) {
  GanState s = make_state(config_from_checkpoint(c));
  s.epoch = std::stoull(c.meta("epoch"));
  auto copy_into = [](const Tensor& src, std::span<float> dst, const Shape& shape, const std::string& what) {
    if (src.shape() != shape) {
      throw FormatError("checkpoint tensor '" + what + "' has shape " + to_string(src.shape()) + ", expected " +
                        to_string(shape));
    }
    std::copy(src.values().begin(), src.values().end(), dst.begin());
  };
  for (auto& [name, net] : s.nets) {
    auto& opt = s.opts.at(name);
    opt.step = std::stoull(c.meta("opt." + name + ".step"));
    for (std::size_t i = 0; i < net.params.size(); ++i) {
      auto& p = net.params[i];
      copy_into(c.tensor(name + "/" + p.name), p.tensor.mutable_values(), p.tensor.shape(), name + "/" + p.name);
      copy_into(c.tensor("opt/" + name + "/m/" + p.name), opt.m[i], p.tensor.shape(), "adam m of " + p.name);
      copy_into(c.tensor("opt/" + name + "/v/" + p.name), opt.v[i], p.tensor.shape(), "adam v of " + p.name);
    }
    for (auto& [bname, b] : net.buffers) {
      const Shape shape{b.running_mean.size()};
      copy_into(c.tensor(name + "/" + bname + ".running_mean"), b.running_mean, shape, bname + ".running_mean");
      copy_into(c.tensor(name + "/" + bname + ".running_var"), b.running_var, shape, bname + ".running_var");
    }
  }
  return s;
}

inline void save_state(const std::filesystem::path& path, const GanState& s) { save_checkpoint(path, to_checkpoint(s)); }

inline GanState load_state(const std::filesystem::path& path) { return state_from_checkpoint(load_checkpoint(path)); }

// ---------------------------------------------------------------------------
// Training steps

/// One conditional-GAN update on a batch: `d_steps` discriminator updates on
/// real (x, y) and detached fake (x, G(x)) pairs, then one generator update on
/// the adversarial + L1 (+ TV) objective. `seed` drives generator dropout.
inline StepLosses pix2pix_step(const Batch& batch, Network& g, Network& d, AdamState& opt_g, AdamState& opt_d,
                               const LossConfig& loss, std::uint64_t seed, std::size_t d_steps = 1) {
  StepLosses out;
  const Tensor& x = batch.sketch;
  const Tensor& y = batch.color;
  const Tensor fake = forward(g, x, Mode::train, seed);
  const Tensor fake_detached = fake.detach();
  for (std::size_t k = 0; k < d_steps; ++k) {
    const auto real_logits = forward(d, concat<float>({x, y}), Mode::train);
    const auto fake_logits = forward(d, concat<float>({x, fake_detached}), Mode::train);
    const auto ld = d_loss(real_logits, fake_logits);
    backward(ld);
    adam_step(d.params, opt_d);
    out.d_loss += ld.item() / static_cast<double>(d_steps);
  }
  const auto logits = forward(d, concat<float>({x, fake}), Mode::train);
  const auto terms = pix2pix_terms(logits, y, fake, loss);
  backward(terms.total);
  adam_step(g.params, opt_g);
  zero_grads(d.params);
  out.g_adv = terms.adv.item();
  out.l1 = terms.l1.item();
  out.tv = terms.tv.defined() ? terms.tv.item() : tv_loss(fake.detach(), loss.tv_reduction).item();
  out.g_total = terms.total.item();
  return out;
}

/// One unpaired update: D_X and D_Y first, then G and F jointly on
/// adv(G) + adv(F) + lambda_cyc * cycle. x is the sketch domain, y color.
inline StepLosses cyclegan_step(const Batch& batch, Network& g, Network& f, Network& d_x, Network& d_y, AdamState& opt_g,
                                AdamState& opt_f, AdamState& opt_dx, AdamState& opt_dy, const LossConfig& loss,
                                std::uint64_t seed, std::size_t d_steps = 1) {
  StepLosses out;
  const Tensor& x = batch.sketch;
  const Tensor& y = batch.color;
  const Tensor fake_y = forward(g, x, Mode::train, derive_seed(seed, {1}));
  const Tensor fake_x = forward(f, y, Mode::train, derive_seed(seed, {2}));
  const Tensor fake_y_detached = fake_y.detach();
  const Tensor fake_x_detached = fake_x.detach();
  for (std::size_t k = 0; k < d_steps; ++k) {
    const auto ld = d_loss(forward(d_y, y, Mode::train), forward(d_y, fake_y_detached, Mode::train)) +
                    d_loss(forward(d_x, x, Mode::train), forward(d_x, fake_x_detached, Mode::train));
    backward(ld);
    adam_step(d_y.params, opt_dy);
    adam_step(d_x.params, opt_dx);
    out.d_loss += ld.item() / static_cast<double>(d_steps);
  }
  const auto adv = g_adv_loss(forward(d_y, fake_y, Mode::train)) + g_adv_loss(forward(d_x, fake_x, Mode::train));
  const auto rec_x = forward(f, fake_y, Mode::train, derive_seed(seed, {3}));
  const auto rec_y = forward(g, fake_x, Mode::train, derive_seed(seed, {4}));
  const auto cyc = cycle_loss(x, rec_x, y, rec_y);
  const auto total = adv + scalar_mul(cyc, static_cast<float>(loss.lambda_cyc));
  backward(total);
  adam_step(g.params, opt_g);
  adam_step(f.params, opt_f);
  zero_grads(d_x.params);
  zero_grads(d_y.params);
  out.g_adv = adv.item();
  out.cycle = cyc.item();
  out.l1 = l1_loss(y, fake_y.detach()).item();
  out.tv = tv_loss(fake_y.detach(), loss.tv_reduction).item();
  out.g_total = total.item();
  return out;
}

/// Dispatches one optimization step for the state's objective.
inline StepLosses train_step(GanState& s, const Batch& batch, std::uint64_t seed) {
  const auto& cfg = s.config;
  if (cfg.objective() == Objective::cyclegan) {
    return cyclegan_step(batch, s.net("G"), s.net("F"), s.net("D_X"), s.net("D_Y"), s.opt("G"), s.opt("F"),
                         s.opt("D_X"), s.opt("D_Y"), cfg.loss, seed, cfg.d_steps);
  }
  return pix2pix_step(batch, s.net("G"), s.net("D"), s.opt("G"), s.opt("D"), cfg.loss, seed, cfg.d_steps);
}

// ---------------------------------------------------------------------------
// Evaluation

/// Generator outputs in [-1, 1], computed in eval mode without gradients.
inline std::vector<PlanarImage> generate(Network& g, const std::vector<const PlanarImage*>& sketches,
                                         std::size_t batch_size) {
  NoGradGuard no_grad;
  std::vector<PlanarImage> out;
  for (std::size_t begin = 0; begin < sketches.size(); begin += batch_size) {
    const std::size_t end = std::min(sketches.size(), begin + batch_size);
    std::vector<const PlanarImage*> chunk(sketches.begin() + static_cast<std::ptrdiff_t>(begin),
                                          sketches.begin() + static_cast<std::ptrdiff_t>(end));
    const Tensor y = forward(g, stack(chunk), Mode::eval);
    for (std::size_t i = 0; i < chunk.size(); ++i) out.push_back(unstack(y, i));
  }
  return out;
}

struct Evaluation {
  MetricRecord metrics;
  double val_l1 = 0;  // mean |y - y_hat| over the sample
  double val_tv = 0;  // mean per-image summed TV of the outputs
  std::vector<PlanarImage> outputs;
};

inline Evaluation evaluate_generator(Network& g, const std::vector<ImagePair>& sample, std::size_t batch_size,
                                     const FeatureExtractor& extractor) {
  std::vector<const PlanarImage*> sketches;
  for (const auto& p : sample) sketches.push_back(&p.sketch);
  Evaluation ev;
  ev.outputs = generate(g, sketches, batch_size);
  std::vector<LabeledImage> generated, references;
  double l1 = 0, tv = 0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const auto& out = ev.outputs[i];
    const auto& ref = sample[i].color;
    double acc = 0;
    for (std::size_t j = 0; j < out.data.size(); ++j) acc += std::abs(static_cast<double>(out.data[j]) - ref.data[j]);
    l1 += acc / static_cast<double>(out.data.size());
    for (std::size_t c = 0; c < out.channels; ++c) {
      for (std::size_t y = 0; y < out.height; ++y) {
        for (std::size_t x = 0; x < out.width; ++x) {
          if (y + 1 < out.height) tv += std::abs(static_cast<double>(out.at(c, y + 1, x)) - out.at(c, y, x));
          if (x + 1 < out.width) tv += std::abs(static_cast<double>(out.at(c, y, x + 1)) - out.at(c, y, x));
        }
      }
    }
    generated.push_back({sample[i].id, out});
    references.push_back({sample[i].id, ref});
  }
  const auto n = static_cast<double>(sample.size());
  ev.val_l1 = l1 / n;
  ev.val_tv = tv / n;
  ev.metrics = evaluate_sample(generated, references, extractor);
  return ev;
}

/// Rows of sketch | ground truth | generated for the first `rows` examples.
inline RgbImage sample_grid(const std::vector<ImagePair>& sample, const std::vector<PlanarImage>& outputs,
                            std::size_t rows = 4) {
  std::vector<RgbImage> lines;
  for (std::size_t i = 0; i < std::min({rows, sample.size(), outputs.size()}); ++i) {
    lines.push_back(hconcat({denormalize(sample[i].sketch), denormalize(sample[i].color), denormalize(outputs[i])}));
  }
  return vconcat(lines);
}

// ---------------------------------------------------------------------------
// Training loop

struct EpochSummary {
  std::size_t epoch = 0;
  StepLosses train;  // mean over the epoch's batches
  double val_l1 = 0;
  double val_tv = 0;
  MetricRecord metrics;
  double seconds = 0;
};

struct TrainOptions {
  std::filesystem::path run_dir;      // empty: write no artifacts
  std::filesystem::path resume_from;  // checkpoint to continue from
  std::size_t stop_after = 0;         // stop once this epoch completes (0: run to config.epochs)
  std::ostream* log = nullptr;
  std::function<void(const EpochSummary&)> on_epoch;
};

struct TrainResult {
  GanState state;
  std::vector<EpochSummary> history;
};

inline constexpr const char* kLossesHeader = "epoch,d_loss,g_adv,l1,tv,cycle,g_total,val_l1,val_tv";

inline std::string losses_row(const EpochSummary& e) {
  const auto& t = e.train;
  return std::to_string(e.epoch) + "," + format_number(t.d_loss) + "," + format_number(t.g_adv) + "," +
         format_number(t.l1) + "," + format_number(t.tv) + "," + format_number(t.cycle) + "," +
         format_number(t.g_total) + "," + format_number(e.val_l1) + "," + format_number(e.val_tv);
}

namespace detail {

/// Rewrites a CSV keeping the header and rows whose leading epoch is <= `epoch`.
inline void truncate_csv(const std::filesystem::path& path, const std::string& header, std::size_t epoch) {
  std::string kept = header + "\n";
  if (std::filesystem::exists(path)) {
    std::ifstream in(path, std::ios::binary);
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto comma = line.find(',');
      std::size_t e = 0;
      try {
        e = std::stoull(line.substr(0, comma));
      } catch (const std::exception&) {
        continue;
      }
      if (e <= epoch) kept += line + "\n";
    }
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << kept;
}

inline void append_line(const std::filesystem::path& path, const std::string& line) {
  std::ofstream out(path, std::ios::binary | std::ios::app);
  if (!out) throw IoError("cannot append to " + path.string());
  out << line << '\n';
}

inline std::string epoch_file(const char* prefix, std::size_t epoch, const char* ext) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s%04zu%s", prefix, epoch, ext);
  return buf;
}

inline void require_resumable(const TrainConfig& run, const TrainConfig& saved) {
  auto a = to_key_values(run), b = to_key_values(saved);
  for (const char* free_key : {"epochs", "checkpoint_every"}) {
    a.erase(free_key);
    b.erase(free_key);
  }
  for (const auto& [k, v] : a) {
    if (b[k] != v) {
      throw ConfigError("cannot resume: config key '" + k + "' is '" + v + "' but the checkpoint has '" + b[k] + "'");
    }
  }
}

}  // namespace detail

inline std::vector<ImagePair> evaluation_sample(const Dataset& data, std::size_t sample_size) {
  if (data.val.size() < sample_size) {
    throw ConfigError("sample_size " + std::to_string(sample_size) + " exceeds the " +
                      std::to_string(data.val.size()) + " held-out examples");
  }
  return {data.val.begin(), data.val.begin() + static_cast<std::ptrdiff_t>(sample_size)};
}

/// Runs epochs `state.epoch + 1 .. config.epochs`. Each epoch visits every
/// training example once in a (seed, epoch)-determined order, then evaluates
/// the generator on the first `sample_size` held-out examples.
inline TrainResult train(const TrainConfig& cfg, const Dataset& data, const TrainOptions& opts = {}) {
  cfg.validate();
  if (data.train.empty()) throw UsageError("training split is empty");
  if (data.image_size != cfg.image_size || data.sketch_channels != cfg.sketch_channels) {
    throw ConfigError("dataset was loaded at size " + std::to_string(data.image_size) + " with " +
                      std::to_string(data.sketch_channels) + " sketch channels; config wants " +
                      std::to_string(cfg.image_size) + " and " + std::to_string(cfg.sketch_channels));
  }
  const auto sample = evaluation_sample(data, cfg.sample_size);
  const ProjectionExtractor extractor(cfg.feature_dim, cfg.feature_seed);

  TrainResult result;
  if (!opts.resume_from.empty()) {
    result.state = load_state(opts.resume_from);
    detail::require_resumable(cfg, result.state.config);
    result.state.config = cfg;
  } else {
    result.state = make_state(cfg);
  }
  GanState& s = result.state;

  const auto& dir = opts.run_dir;
  const bool artifacts = !dir.empty();
  if (artifacts) {
    std::filesystem::create_directories(dir / "samples");
    std::filesystem::create_directories(dir / "checkpoints");
    std::ofstream(dir / "config.txt", std::ios::binary | std::ios::trunc) << format_key_values(to_key_values(cfg));
    detail::truncate_csv(dir / "metrics.csv", kMetricsHeader, s.epoch);
    detail::truncate_csv(dir / "losses.csv", kLossesHeader, s.epoch);
  }

  const std::size_t last = opts.stop_after == 0 ? cfg.epochs : std::min(cfg.epochs, opts.stop_after);
  for (std::size_t epoch = s.epoch + 1; epoch <= last; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    EpochSummary summary;
    summary.epoch = epoch;
    for (auto& [name, n] : s.nets) n.mode = Mode::train;
    const EpochPlan plan(data.train.size(), cfg.batch_size, cfg.seed, epoch);
    for (std::size_t k = 0; k < plan.size(); ++k) {
      const Batch batch = plan.batch(data.train, k, cfg.augment);
      try {
        summary.train += train_step(s, batch, derive_seed(cfg.seed, {epoch, k, 0xd0}));
      } catch (const NumericError& e) {
        throw NumericError("epoch " + std::to_string(epoch) + " batch " + std::to_string(k) + ": " + e.what());
      }
    }
    const double nb = static_cast<double>(plan.size());
    summary.train.d_loss /= nb;
    summary.train.g_adv /= nb;
    summary.train.l1 /= nb;
    summary.train.tv /= nb;
    summary.train.cycle /= nb;
    summary.train.g_total /= nb;

    auto& g = s.net("G");
    g.mode = Mode::eval;
    auto ev = evaluate_generator(g, sample, cfg.batch_size, extractor);
    g.mode = Mode::train;
    ev.metrics.epoch = epoch;
    summary.metrics = ev.metrics;
    summary.val_l1 = ev.val_l1;
    summary.val_tv = ev.val_tv;
    s.epoch = epoch;

    if (artifacts) {
      detail::append_line(dir / "metrics.csv", metrics_row(summary.metrics));
      detail::append_line(dir / "losses.csv", losses_row(summary));
      write_png(dir / "samples" / detail::epoch_file("epoch_", epoch, ".png"), sample_grid(sample, ev.outputs));
      if (cfg.checkpoint_every > 0 && epoch % cfg.checkpoint_every == 0) {
        save_state(dir / "checkpoints" / detail::epoch_file("epoch_", epoch, ".gnm"), s);
      }
      if (epoch == last) save_state(dir / "checkpoints" / "final.gnm", s);
    }
    summary.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (opts.log != nullptr) {
      char line[256];
      std::snprintf(line, sizeof line,
                    "epoch %zu/%zu  d=%.4f g_adv=%.4f l1=%.4f g=%.4f  val_l1=%.4f fid=%.4f ssim=%.4f  (%.1fs)\n",
                    epoch, cfg.epochs, summary.train.d_loss, summary.train.g_adv, summary.train.l1,
                    summary.train.g_total, summary.val_l1, summary.metrics.fid, summary.metrics.ssim_mean,
                    summary.seconds);
      *opts.log << line << std::flush;
    }
    if (opts.on_epoch) opts.on_epoch(summary);
    result.history.push_back(summary);
  }
  return result;
}

// ---------------------------------------------------------------------------
// Inference

/// Colorizes sketches with the state's generator. Inputs are resized to the
/// configured image size; outputs have that size.
inline std::vector<RgbImage> infer(GanState& s, const std::vector<RgbImage>& sketches) {
  const auto& cfg = s.config;
  std::vector<PlanarImage> prepared;
  prepared.reserve(sketches.size());
  for (const auto& sk : sketches) prepared.push_back(prepare_sketch(sk, cfg.image_size, cfg.sketch_channels));
  std::vector<const PlanarImage*> ptrs;
  for (const auto& p : prepared) ptrs.push_back(&p);
  auto& g = s.net("G");
  const Mode previous = g.mode;
  g.mode = Mode::eval;
  const auto outputs = generate(g, ptrs, cfg.batch_size);
  g.mode = previous;
  std::vector<RgbImage> images;
  for (const auto& o : outputs) images.push_back(denormalize(o));
  return images;
}

}  // namespace inkgan
