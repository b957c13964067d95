#pragma once

// Dataset ingestion and the training input pipeline: pair splitting,
// resizing, normalization to [-1, 1], paired augmentation and shuffled
// batching.
//
// Prepared datasets live on disk as
//   <root>/manifest.tsv          one "id<TAB>split" line per pair, LF endings
//   <root>/{train,val}/<id>.png  color | sketch, side by side

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "inkgan/image.hpp"
#include "inkgan/random.hpp"
#include "inkgan/tensor.hpp"

namespace inkgan {

struct SplitHalves {
  RgbImage color;   // left half: ground truth
  RgbImage sketch;  // right half: line art
};

inline SplitHalves split_pair(const RgbImage& raw) {
  if (raw.width % 2 != 0 || raw.width == 0) {
    throw FormatError("pair image width must be even, got " + std::to_string(raw.width));
  }
  const std::size_t half = raw.width / 2;
  SplitHalves out{RgbImage(half, raw.height), RgbImage(half, raw.height)};
  for (std::size_t y = 0; y < raw.height; ++y) {
    const auto row = raw.pixels.begin() + static_cast<std::ptrdiff_t>(y * raw.width * 3);
    std::copy_n(row, half * 3, out.color.pixels.begin() + static_cast<std::ptrdiff_t>(y * half * 3));
    std::copy_n(row + static_cast<std::ptrdiff_t>(half * 3), half * 3,
                out.sketch.pixels.begin() + static_cast<std::ptrdiff_t>(y * half * 3));
  }
  return out;
}

inline RgbImage join_pair(const RgbImage& color, const RgbImage& sketch) { return hconcat({color, sketch}); }

/// Bilinear resize with corner-aligned sampling: output pixel i reads source
/// coordinate i * (n_in - 1) / (n_out - 1), so corners map onto corners.
inline PlanarImage resize(const PlanarImage& img, std::size_t out_h, std::size_t out_w) {
  if (out_h < 2 || out_w < 2) {
    throw ConfigError("resize target " + std::to_string(out_h) + "x" + std::to_string(out_w) + " is degenerate");
  }
  if (out_h == img.height && out_w == img.width) return img;
  PlanarImage out(img.channels, out_h, out_w);
  auto coord = [](std::size_t i, std::size_t n_in, std::size_t n_out, std::size_t& i0, std::size_t& i1, double& f) {
    const double src = n_in == 1 ? 0.0 : static_cast<double>(i) * static_cast<double>(n_in - 1) / static_cast<double>(n_out - 1);
    i0 = std::min(static_cast<std::size_t>(std::floor(src)), n_in - 1);
    i1 = std::min(i0 + 1, n_in - 1);
    f = src - static_cast<double>(i0);
  };
  for (std::size_t y = 0; y < out_h; ++y) {
    std::size_t y0 = 0, y1 = 0;
    double fy = 0;
    coord(y, img.height, out_h, y0, y1, fy);
    for (std::size_t x = 0; x < out_w; ++x) {
      std::size_t x0 = 0, x1 = 0;
      double fx = 0;
      coord(x, img.width, out_w, x0, x1, fx);
      for (std::size_t c = 0; c < img.channels; ++c) {
        const double top = (1 - fx) * img.at(c, y0, x0) + fx * img.at(c, y0, x1);
        const double bottom = (1 - fx) * img.at(c, y1, x0) + fx * img.at(c, y1, x1);
        out.at(c, y, x) = static_cast<float>((1 - fy) * top + fy * bottom);
      }
    }
  }
  return out;
}

inline PlanarImage resize(const PlanarImage& img, std::size_t size) { return resize(img, size, size); }

/// Resize of an 8-bit image, rounding half up.
inline RgbImage resize(const RgbImage& img, std::size_t size) {
  if (img.width == size && img.height == size) return img;
  return to_rgb(resize(to_planar(img), size));
}

/// v -> v / 127.5 - 1, so 0 -> -1 and 255 -> +1.
inline float normalize(double byte_value) { return static_cast<float>(byte_value / 127.5 - 1.0); }

/// Inverse of normalize: clamp to [0, 255] and round half up.
inline std::uint8_t denormalize(double v) { return to_byte((v + 1.0) * 127.5); }

inline PlanarImage normalize(const PlanarImage& bytes) {
  PlanarImage out = bytes;
  for (auto& v : out.data) v = normalize(v);
  return out;
}

inline RgbImage denormalize(const PlanarImage& img) {
  PlanarImage bytes = img;
  for (auto& v : bytes.data) v = static_cast<float>(denormalize(v));
  return to_rgb(bytes);
}

/// ITU-R 601 luma of a 3-channel planar image.
inline PlanarImage to_gray(const PlanarImage& img) {
  if (img.channels == 1) return img;
  PlanarImage out(1, img.height, img.width);
  for (std::size_t y = 0; y < img.height; ++y) {
    for (std::size_t x = 0; x < img.width; ++x) {
      out.at(0, y, x) = static_cast<float>(0.299 * img.at(0, y, x) + 0.587 * img.at(1, y, x) + 0.114 * img.at(2, y, x));
    }
  }
  return out;
}

/// An aligned training example: sketch [C,S,S] and color [3,S,S] in [-1, 1].
struct ImagePair {
  PlanarImage sketch;
  PlanarImage color;
  std::string id;
};

inline PlanarImage prepare_sketch(const RgbImage& sketch, std::size_t size, std::size_t sketch_channels) {
  PlanarImage s = resize(to_planar(sketch), size);
  if (sketch_channels == 1) s = to_gray(s);
  return normalize(s);
}

inline ImagePair make_pair(const RgbImage& raw, std::size_t size, std::size_t sketch_channels, std::string id) {
  if (sketch_channels != 1 && sketch_channels != 3) throw ConfigError("sketch_channels must be 1 or 3");
  const auto halves = split_pair(raw);
  return {prepare_sketch(halves.sketch, size, sketch_channels), normalize(resize(to_planar(halves.color), size)),
          std::move(id)};
}

inline PlanarImage mirror(const PlanarImage& img) {
  PlanarImage out = img;
  for (std::size_t c = 0; c < img.channels; ++c) {
    for (std::size_t y = 0; y < img.height; ++y) {
      for (std::size_t x = 0; x < img.width; ++x) out.at(c, y, x) = img.at(c, y, img.width - 1 - x);
    }
  }
  return out;
}

inline PlanarImage crop(const PlanarImage& img, std::size_t top, std::size_t left, std::size_t h, std::size_t w) {
  PlanarImage out(img.channels, h, w);
  for (std::size_t c = 0; c < img.channels; ++c) {
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) out.at(c, y, x) = img.at(c, top + y, left + x);
    }
  }
  return out;
}

/// Random jitter and mirroring with one shared transform for both images:
/// upscale to S + S/8, crop an S x S window at a random offset, then mirror
/// horizontally with probability 0.5.
inline ImagePair augment(const ImagePair& pair, std::uint64_t seed) {
  const std::size_t s = pair.color.height;
  const std::size_t margin = s / 8;
  Rng rng(seed);
  const std::size_t top = static_cast<std::size_t>(rng() % (margin + 1));
  const std::size_t left = static_cast<std::size_t>(rng() % (margin + 1));
  const bool flip = uniform01(rng) < 0.5;
  auto transform = [&](const PlanarImage& img) {
    PlanarImage out = crop(resize(img, s + margin), top, left, s, s);
    return flip ? mirror(out) : out;
  };
  return {transform(pair.sketch), transform(pair.color), pair.id};
}

struct Batch {
  Tensor sketch;  // [B,C,S,S]
  Tensor color;   // [B,3,S,S]
  std::vector<std::string> ids;
};

inline Tensor stack(const std::vector<const PlanarImage*>& images) {
  const auto& first = *images.front();
  std::vector<float> v;
  v.reserve(images.size() * first.data.size());
  for (const auto* img : images) {
    if (img->channels != first.channels || img->height != first.height || img->width != first.width) {
      throw ShapeError("cannot stack images of different shapes");
    }
    v.insert(v.end(), img->data.begin(), img->data.end());
  }
  return Tensor({images.size(), first.channels, first.height, first.width}, std::move(v));
}

/// Item `index` of an NCHW tensor as a planar image.
inline PlanarImage unstack(const Tensor& t, std::size_t index) {
  PlanarImage out(t.dim(1), t.dim(2), t.dim(3));
  const auto n = out.data.size();
  std::copy_n(t.values().begin() + static_cast<std::ptrdiff_t>(index * n), n, out.data.begin());
  return out;
}

inline Batch make_batch(const std::vector<ImagePair>& data, const std::vector<std::size_t>& indices) {
  if (indices.empty()) throw UsageError("empty batch");
  std::vector<const PlanarImage*> sketches, colors;
  Batch b;
  for (auto i : indices) {
    sketches.push_back(&data.at(i).sketch);
    colors.push_back(&data.at(i).color);
    b.ids.push_back(data[i].id);
  }
  b.sketch = stack(sketches);
  b.color = stack(colors);
  return b;
}

/// Shuffled batch schedule for one epoch; the permutation depends only on
/// (seed, epoch). The last partial batch is kept.
class EpochPlan {
 public:
  EpochPlan(std::size_t dataset_size, std::size_t batch_size, std::uint64_t seed, std::uint64_t epoch)
      : batch_size_(batch_size), seed_(seed), epoch_(epoch), order_(dataset_size) {
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (dataset_size == 0) throw UsageError("cannot batch an empty dataset");
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    Rng rng(derive_seed(seed, {epoch, 0x5eed}));
    std::shuffle(order_.begin(), order_.end(), rng);
  }

  std::size_t size() const { return (order_.size() + batch_size_ - 1) / batch_size_; }
  const std::vector<std::size_t>& permutation() const { return order_; }

  std::vector<std::size_t> indices(std::size_t k) const {
    const std::size_t begin = k * batch_size_;
    const std::size_t end = std::min(order_.size(), begin + batch_size_);
    return {order_.begin() + static_cast<std::ptrdiff_t>(begin), order_.begin() + static_cast<std::ptrdiff_t>(end)};
  }

  /// Batch k; with augmentation each example gets a transform seeded by
  /// (seed, epoch, example index).
  Batch batch(const std::vector<ImagePair>& data, std::size_t k, bool with_augment) const {
    const auto idx = indices(k);
    if (!with_augment) return make_batch(data, idx);
    std::vector<ImagePair> augmented;
    std::vector<std::size_t> local;
    for (auto i : idx) {
      augmented.push_back(augment(data.at(i), derive_seed(seed_, {epoch_, i, 0xa06})));
      local.push_back(local.size());
    }
    return make_batch(augmented, local);
  }

 private:
  std::size_t batch_size_;
  std::uint64_t seed_;
  std::uint64_t epoch_;
  std::vector<std::size_t> order_;
};

inline std::vector<Batch> batches(const std::vector<ImagePair>& data, std::size_t batch_size, std::uint64_t seed,
                                  std::uint64_t epoch, bool with_augment = false) {
  EpochPlan plan(data.size(), batch_size, seed, epoch);
  std::vector<Batch> out;
  for (std::size_t k = 0; k < plan.size(); ++k) out.push_back(plan.batch(data, k, with_augment));
  return out;
}

struct ManifestEntry {
  std::string id;
  std::string split;  // "train" or "val"

  bool operator==(const ManifestEntry&) const = default;
};

inline void write_manifest(const std::filesystem::path& path, const std::vector<ManifestEntry>& entries) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write manifest " + path.string());
  for (const auto& e : entries) out << e.id << '\t' << e.split << '\n';
  if (!out) throw IoError("failed writing manifest " + path.string());
}

inline std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read manifest " + path.string());
  std::vector<ManifestEntry> entries;
  std::set<std::string> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || line.find('\t', tab + 1) != std::string::npos) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": expected 'id<TAB>split'");
    }
    ManifestEntry e{line.substr(0, tab), line.substr(tab + 1)};
    if (e.split != "train" && e.split != "val") {
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": unknown split '" + e.split + "'");
    }
    if (e.id.empty() || !seen.insert(e.id).second) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": empty or duplicate id '" + e.id + "'");
    }
    entries.push_back(std::move(e));
  }
  return entries;
}

struct Dataset {
  std::vector<ImagePair> train;
  std::vector<ImagePair> val;
  std::size_t image_size = 0;
  std::size_t sketch_channels = 3;
};

/// Loads a prepared dataset; images are resized to `image_size` if needed.
inline Dataset load_dataset(const std::filesystem::path& root, std::size_t image_size, std::size_t sketch_channels) {
  if (!std::filesystem::is_directory(root)) throw IoError("dataset directory not found: " + root.string());
  Dataset ds;
  ds.image_size = image_size;
  ds.sketch_channels = sketch_channels;
  for (const auto& e : read_manifest(root / "manifest.tsv")) {
    const auto path = root / e.split / (e.id + ".png");
    auto pair = make_pair(read_png(path), image_size, sketch_channels, e.id);
    (e.split == "train" ? ds.train : ds.val).push_back(std::move(pair));
  }
  return ds;
}

struct PrepareReport {
  std::vector<ManifestEntry> manifest;
  std::vector<std::string> skipped;  // "path: reason"
};

/// Splits every raw pair PNG in `input_dir`, resizes both halves to size x
/// size, assigns round(n * val_fraction) pairs to val by a seeded
/// permutation, and writes the prepared tree plus manifest.
inline PrepareReport prepare_dataset(const std::filesystem::path& input_dir, const std::filesystem::path& output_dir,
                                     std::size_t size, double val_fraction, std::uint64_t seed) {
  namespace fs = std::filesystem;
  if (size < 4) throw ConfigError("image size must be >= 4, got " + std::to_string(size));
  if (!(val_fraction >= 0.0 && val_fraction < 1.0)) throw ConfigError("val_fraction must be in [0, 1)");
  if (!fs::is_directory(input_dir)) throw IoError("input directory not found: " + input_dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(input_dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".png") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());

  PrepareReport report;
  std::vector<std::pair<std::string, RgbImage>> pairs;
  for (const auto& f : files) {
    try {
      const auto raw = read_png(f);
      const auto halves = split_pair(raw);
      if (raw.height < 8) throw FormatError("height below 8 pixels");
      pairs.emplace_back(f.stem().string(), join_pair(resize(halves.color, size), resize(halves.sketch, size)));
    } catch (const Error& e) {
      report.skipped.push_back(f.string() + ": " + e.what());
    }
  }
  if (pairs.empty()) {
    std::string msg = "no usable pair images in " + input_dir.string();
    for (const auto& s : report.skipped) msg += "\n  skipped " + s;
    throw IoError(msg);
  }

  std::vector<std::size_t> order(pairs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(derive_seed(seed, {0x5b1e}));
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_val = static_cast<std::size_t>(std::llround(static_cast<double>(pairs.size()) * val_fraction));
  std::vector<bool> is_val(pairs.size(), false);
  for (std::size_t k = 0; k < n_val; ++k) is_val[order[k]] = true;

  fs::create_directories(output_dir / "train");
  fs::create_directories(output_dir / "val");
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const std::string split = is_val[i] ? "val" : "train";
    write_png(output_dir / split / (pairs[i].first + ".png"), pairs[i].second);
    report.manifest.push_back({pairs[i].first, split});
  }
  write_manifest(output_dir / "manifest.tsv", report.manifest);
  return report;
}

}  // namespace inkgan
