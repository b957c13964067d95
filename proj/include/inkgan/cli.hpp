#pragma once

// Command-line front end: prepare, synth, train, eval, report, infer.
// Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.

#include <CLI11.hpp>

#include <chrono>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "inkgan/config.hpp"
#include "inkgan/data.hpp"
#include "inkgan/metrics.hpp"
#include "inkgan/report.hpp"
#include "inkgan/synth.hpp"
#include "inkgan/trainer.hpp"

namespace inkgan {

enum ExitCode : int { kExitOk = 0, kExitFailure = 1, kExitUsage = 2 };

/// Resolves the training config: preset, then config file, then `--set`
/// pairs, then dedicated flags. Unknown keys are rejected.
struct RunConfigSources {
  std::string preset = "desk";
  std::filesystem::path config_file;
  std::vector<std::string> assignments;  // "key=value"
  KeyValues flags;
};

inline TrainConfig resolve_train_config(const RunConfigSources& src) {
  TrainConfig cfg;
  if (src.preset == "desk") {
    cfg = TrainConfig::desk();
  } else if (src.preset != "full") {
    throw ConfigError("unknown preset '" + src.preset + "' (expected desk or full)");
  }
  KeyValues kv;
  if (!src.config_file.empty()) kv = read_key_values(src.config_file);
  for (const auto& a : src.assignments) {
    const auto eq = a.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + a + "'");
    kv[a.substr(0, eq)] = a.substr(eq + 1);
  }
  for (const auto& [k, v] : src.flags) kv[k] = v;
  std::vector<std::string> unknown;
  for (const auto& [k, v] : kv) {
    if (!is_train_key(k)) unknown.push_back(k);
  }
  if (!unknown.empty()) {
    std::string list;
    for (const auto& k : unknown) list += (list.empty() ? "" : ", ") + k;
    throw ConfigError("unknown config key(s): " + list);
  }
  cfg = apply_key_values(cfg, kv);
  cfg.validate();
  return cfg;
}

namespace detail {

inline std::string timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  localtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y%m%d-%H%M%S", &tm);
  return buf;
}

inline void require_exists(const std::filesystem::path& p, const std::string& what) {
  if (!std::filesystem::exists(p)) throw UsageError(what + " not found: " + p.string());
}

inline bool is_png(const std::filesystem::path& p) {
  auto ext = p.extension().string();
  for (auto& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return ext == ".png";
}

}  // namespace detail

inline int run_cli(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Sketch colorization with conditional and cycle-consistent GANs"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  // prepare
  auto* prepare = app.add_subcommand("prepare", "Split raw side-by-side pairs into a train/val dataset");
  std::filesystem::path prep_in, prep_out;
  std::size_t prep_size = 256;
  double prep_val = 0.1;
  std::uint64_t prep_seed = 0;
  prepare->add_option("--input-dir", prep_in, "Directory of raw pair PNGs (color | sketch)")->required();
  prepare->add_option("--output-dir", prep_out, "Prepared dataset directory")->required();
  prepare->add_option("--size", prep_size, "Output image size")->capture_default_str();
  prepare->add_option("--val-fraction", prep_val, "Fraction of pairs held out")->capture_default_str();
  prepare->add_option("--seed", prep_seed, "Split seed")->capture_default_str();

  // synth
  auto* synth = app.add_subcommand("synth", "Write procedurally generated raw pairs");
  std::filesystem::path synth_out;
  std::size_t synth_count = 200, synth_size = 64;
  std::uint64_t synth_seed = 0;
  synth->add_option("--output-dir", synth_out, "Destination directory")->required();
  synth->add_option("--count", synth_count, "Number of pairs")->capture_default_str();
  synth->add_option("--size", synth_size, "Pair height (width is twice this)")->capture_default_str();
  synth->add_option("--seed", synth_seed, "Generator seed")->capture_default_str();

  // train
  auto* train_cmd = app.add_subcommand("train", "Train a model on a prepared dataset");
  RunConfigSources sources;
  std::filesystem::path train_data, runs_dir = "runs", run_dir, resume;
  train_cmd->add_option("--data", train_data, "Prepared dataset directory")->required();
  train_cmd->add_option("--config", sources.config_file, "Config file of 'key = value' lines");
  train_cmd->add_option("--preset", sources.preset, "Base values: desk or full")->capture_default_str();
  train_cmd->add_option("--set", sources.assignments, "Override any config key (key=value), repeatable");
  train_cmd->add_option("--runs-dir", runs_dir, "Parent of timestamped run directories")->capture_default_str();
  train_cmd->add_option("--run-dir", run_dir, "Exact run directory (overrides --runs-dir)");
  train_cmd->add_option("--resume", resume, "Checkpoint to continue from");
  struct Flag {
    const char* name;
    const char* key;
    std::string value;
  };
  std::vector<Flag> flags{{"--objective", "objective", ""},   {"--epochs", "epochs", ""},
                          {"--batch-size", "batch_size", ""}, {"--size", "image_size", ""},
                          {"--seed", "seed", ""},             {"--lambda-l1", "lambda_l1", ""},
                          {"--lambda-tv", "lambda_tv", ""},   {"--lambda-cyc", "lambda_cyc", ""},
                          {"--lr", "lr", ""},                 {"--sample-size", "sample_size", ""},
                          {"--checkpoint-every", "checkpoint_every", ""}};
  for (auto& f : flags) train_cmd->add_option(f.name, f.value, std::string("Sets config key ") + f.key);

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "Compute FID and SSIM of a checkpoint on held-out data");
  std::filesystem::path eval_ckpt, eval_data, eval_csv;
  std::size_t eval_n = 100;
  bool eval_control = false;
  eval_cmd->add_option("--checkpoint", eval_ckpt, "Checkpoint file")->required();
  eval_cmd->add_option("--data", eval_data, "Prepared dataset directory")->required();
  eval_cmd->add_option("--sample-size", eval_n, "Number of held-out images")->capture_default_str();
  eval_cmd->add_option("--csv", eval_csv, "Metrics CSV to append to (default: eval.csv beside the checkpoint)");
  eval_cmd->add_flag("--control", eval_control, "Score ground truth against itself");

  // report
  auto* report_cmd = app.add_subcommand("report", "Chart per-epoch metrics of one or more runs");
  std::vector<std::filesystem::path> report_runs;
  std::vector<std::string> report_labels;
  std::filesystem::path report_out;
  report_cmd->add_option("--run-dir", report_runs, "Run directory containing metrics.csv (repeatable)")->required();
  report_cmd->add_option("--label", report_labels, "Legend label per run (default: directory name)");
  report_cmd->add_option("--output-dir", report_out, "Where to write charts (default: <first run>/report)");

  // infer
  auto* infer_cmd = app.add_subcommand("infer", "Colorize sketch PNGs with a trained generator");
  std::filesystem::path infer_ckpt, infer_in, infer_out;
  bool infer_pairs = false;
  infer_cmd->add_option("--checkpoint", infer_ckpt, "Checkpoint file")->required();
  infer_cmd->add_option("--input", infer_in, "Sketch PNG or directory of PNGs")->required();
  infer_cmd->add_option("--output", infer_out, "Output PNG or directory")->required();
  infer_cmd->add_flag("--pairs", infer_pairs, "Inputs are raw pairs; use their sketch half");

  std::vector<char*> argv;
  std::vector<std::string> storage(args);
  for (auto& a : storage) argv.push_back(a.data());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*prepare) {
      detail::require_exists(prep_in, "input directory");
      const auto report = prepare_dataset(prep_in, prep_out, prep_size, prep_val, prep_seed);
      std::size_t n_val = 0;
      for (const auto& e : report.manifest) n_val += e.split == "val";
      for (const auto& s : report.skipped) err << "skipped " << s << "\n";
      out << "prepared " << report.manifest.size() << " pairs (" << report.manifest.size() - n_val << " train, "
          << n_val << " val) in " << prep_out.string() << "\n";
      return kExitOk;
    }
    if (*synth) {
      write_synth_dataset(synth_out, synth_count, synth_size, synth_seed);
      out << "wrote " << synth_count << " pairs to " << synth_out.string() << "\n";
      return kExitOk;
    }
    if (*train_cmd) {
      for (const auto& f : flags) {
        if (!f.value.empty()) sources.flags[f.key] = f.value;
      }
      const TrainConfig cfg = resolve_train_config(sources);
      detail::require_exists(train_data, "dataset directory");
      if (!resume.empty()) detail::require_exists(resume, "checkpoint");
      if (run_dir.empty()) {
        run_dir = runs_dir / (detail::timestamp() + "-" + name(cfg.objective()) + "-s" + std::to_string(cfg.seed));
      }
      out << "# resolved config\n" << format_key_values(to_key_values(cfg)) << "# run directory: " << run_dir.string()
          << "\n# feature extractor: " << ProjectionExtractor(cfg.feature_dim, cfg.feature_seed).name() << "\n";
      const Dataset data = load_dataset(train_data, cfg.image_size, cfg.sketch_channels);
      TrainOptions opts;
      opts.run_dir = run_dir;
      opts.resume_from = resume;
      opts.log = &out;
      train(cfg, data, opts);
      out << "final checkpoint: " << (run_dir / "checkpoints" / "final.gnm").string() << "\n";
      return kExitOk;
    }
    if (*eval_cmd) {
      detail::require_exists(eval_ckpt, "checkpoint");
      detail::require_exists(eval_data, "dataset directory");
      GanState state = load_state(eval_ckpt);
      const auto& cfg = state.config;
      const Dataset data = load_dataset(eval_data, cfg.image_size, cfg.sketch_channels);
      const auto sample = evaluation_sample(data, eval_n);
      const ProjectionExtractor extractor(cfg.feature_dim, cfg.feature_seed);
      MetricRecord record;
      if (eval_control) {
        std::vector<LabeledImage> refs;
        for (const auto& p : sample) refs.push_back({p.id, p.color});
        record = evaluate_sample(refs, refs, extractor);
      } else {
        record = evaluate_generator(state.net("G"), sample, cfg.batch_size, extractor).metrics;
      }
      record.epoch = state.epoch;
      if (eval_csv.empty()) eval_csv = eval_ckpt.parent_path() / "eval.csv";
      append_metrics_csv(eval_csv, record);
      out << "# feature extractor: " << extractor.name() << "\n" << kMetricsHeader << "\n" << metrics_row(record) << "\n";
      return kExitOk;
    }
    if (*report_cmd) {
      std::vector<RunSeries> runs;
      for (std::size_t i = 0; i < report_runs.size(); ++i) {
        const auto csv = report_runs[i] / "metrics.csv";
        detail::require_exists(csv, "metrics file");
        RunSeries s;
        s.label = i < report_labels.size() ? report_labels[i] : report_runs[i].filename().string();
        if (s.label.empty()) s.label = report_runs[i].parent_path().filename().string();
        s.records = read_metrics_csv(csv);
        if (s.records.empty()) throw UsageError(csv.string() + " has no metric rows");
        runs.push_back(std::move(s));
      }
      if (report_out.empty()) report_out = report_runs.front() / "report";
      std::string extractor_name;
      for (const auto& dir : report_runs) {
        std::string name;
        if (std::filesystem::exists(dir / "config.txt")) {
          const auto cfg = apply_key_values(TrainConfig{}, read_key_values(dir / "config.txt"));
          name = ProjectionExtractor(cfg.feature_dim, cfg.feature_seed).name();
        }
        if (&dir == &report_runs.front()) {
          extractor_name = name;
        } else if (name != extractor_name) {
          err << "warning: runs use different feature extractors; FID values are not comparable\n";
          extractor_name.clear();
          break;
        }
      }
      for (const auto& p : write_report(runs, report_out, extractor_name)) out << "wrote " << p.string() << "\n";
      return kExitOk;
    }
    if (*infer_cmd) {
      detail::require_exists(infer_ckpt, "checkpoint");
      detail::require_exists(infer_in, "input");
      GanState state = load_state(infer_ckpt);
      std::vector<std::filesystem::path> inputs, outputs;
      if (std::filesystem::is_directory(infer_in)) {
        for (const auto& e : std::filesystem::directory_iterator(infer_in)) {
          if (e.is_regular_file() && detail::is_png(e.path())) inputs.push_back(e.path());
        }
        std::sort(inputs.begin(), inputs.end());
        std::filesystem::create_directories(infer_out);
        for (const auto& p : inputs) outputs.push_back(infer_out / p.filename());
      } else {
        inputs.push_back(infer_in);
        if (infer_out.has_parent_path()) std::filesystem::create_directories(infer_out.parent_path());
        outputs.push_back(infer_out);
      }
      std::vector<RgbImage> sketches;
      for (const auto& p : inputs) {
        auto img = read_png(p);
        sketches.push_back(infer_pairs ? split_pair(img).sketch : img);
      }
      const auto images = infer(state, sketches);
      for (std::size_t i = 0; i < images.size(); ++i) write_png(outputs[i], images[i]);
      out << "wrote " << images.size() << " image(s)\n";
      return kExitOk;
    }
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}

inline int run_cli(int argc, char** argv) { return run_cli(std::vector<std::string>(argv, argv + argc)); }

}  // namespace inkgan
