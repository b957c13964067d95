#pragma once

// Image quality metrics: windowed SSIM and the Frechet distance between
// Gaussian fits of image features (FID).
//
// FID here is computed on features from a FeatureExtractor. The default
// ProjectionExtractor is a fixed, seeded random projection rather than a
// pretrained Inception network, so FID values are only comparable between
// runs that use the same extractor (its name() is reported with every score).

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "inkgan/data.hpp"
#include "inkgan/image.hpp"
#include "inkgan/random.hpp"

namespace inkgan {

enum class SsimWindow { gaussian11, uniform8 };

struct SsimConfig {
  SsimWindow window = SsimWindow::gaussian11;
  double k1 = 0.01;
  double k2 = 0.03;
  double dynamic_range = 1.0;
};

/// Separable 1-D taps; the 2-D window is their outer product and sums to 1.
inline std::vector<double> ssim_taps(SsimWindow window) {
  if (window == SsimWindow::uniform8) return std::vector<double>(8, 1.0 / 8.0);
  std::vector<double> g(11);
  double total = 0;
  for (int i = 0; i < 11; ++i) {
    const double d = i - 5;
    g[static_cast<std::size_t>(i)] = std::exp(-d * d / (2 * 1.5 * 1.5));
    total += g[static_cast<std::size_t>(i)];
  }
  for (auto& v : g) v /= total;
  return g;
}

namespace detail {

// Valid-mode separable filter of one channel plane.
inline std::vector<double> filter_valid(const std::vector<double>& plane, std::size_t h, std::size_t w,
                                        const std::vector<double>& taps) {
  const std::size_t k = taps.size();
  const std::size_t oh = h - k + 1, ow = w - k + 1;
  std::vector<double> rows(h * ow, 0.0);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < ow; ++x) {
      double acc = 0;
      for (std::size_t t = 0; t < k; ++t) acc += taps[t] * plane[y * w + x + t];
      rows[y * ow + x] = acc;
    }
  }
  std::vector<double> out(oh * ow, 0.0);
  for (std::size_t y = 0; y < oh; ++y) {
    for (std::size_t x = 0; x < ow; ++x) {
      double acc = 0;
      for (std::size_t t = 0; t < k; ++t) acc += taps[t] * rows[(y + t) * ow + x];
      out[y * ow + x] = acc;
    }
  }
  return out;
}

}  // namespace detail

/// Mean SSIM over every valid window position and over channels. Inputs must
/// share a shape and lie in [0, dynamic_range].
inline double ssim(const PlanarImage& a, const PlanarImage& b, const SsimConfig& cfg = {}) {
  if (a.channels != b.channels || a.height != b.height || a.width != b.width) {
    throw ShapeError("ssim: image shapes differ");
  }
  if (!(cfg.k1 > 0 && cfg.k2 > 0)) throw ConfigError("ssim: K1 and K2 must be positive");
  const auto taps = ssim_taps(cfg.window);
  const std::size_t k = taps.size();
  if (a.height < k || a.width < k) {
    throw ShapeError("ssim: image " + std::to_string(a.height) + "x" + std::to_string(a.width) +
                     " smaller than the " + std::to_string(k) + "x" + std::to_string(k) + " window");
  }
  const double c1 = (cfg.k1 * cfg.dynamic_range) * (cfg.k1 * cfg.dynamic_range);
  const double c2 = (cfg.k2 * cfg.dynamic_range) * (cfg.k2 * cfg.dynamic_range);
  const std::size_t plane = a.height * a.width;
  double total = 0;
  for (std::size_t c = 0; c < a.channels; ++c) {
    std::vector<double> pa(plane), pb(plane), aa(plane), bb(plane), ab(plane);
    for (std::size_t i = 0; i < plane; ++i) {
      pa[i] = a.data[c * plane + i];
      pb[i] = b.data[c * plane + i];
      aa[i] = pa[i] * pa[i];
      bb[i] = pb[i] * pb[i];
      ab[i] = pa[i] * pb[i];
    }
    const auto mu_a = detail::filter_valid(pa, a.height, a.width, taps);
    const auto mu_b = detail::filter_valid(pb, a.height, a.width, taps);
    const auto e_aa = detail::filter_valid(aa, a.height, a.width, taps);
    const auto e_bb = detail::filter_valid(bb, a.height, a.width, taps);
    const auto e_ab = detail::filter_valid(ab, a.height, a.width, taps);
    double channel_sum = 0;
    for (std::size_t i = 0; i < mu_a.size(); ++i) {
      const double var_a = e_aa[i] - mu_a[i] * mu_a[i];
      const double var_b = e_bb[i] - mu_b[i] * mu_b[i];
      const double cov = e_ab[i] - mu_a[i] * mu_b[i];
      channel_sum += ((2 * mu_a[i] * mu_b[i] + c1) * (2 * cov + c2)) /
                     ((mu_a[i] * mu_a[i] + mu_b[i] * mu_b[i] + c1) * (var_a + var_b + c2));
    }
    total += channel_sum / static_cast<double>(mu_a.size());
  }
  return total / static_cast<double>(a.channels);
}

/// Deterministic image -> feature-vector map.
class FeatureExtractor {
 public:
  virtual ~FeatureExtractor() = default;
  virtual std::string name() const = 0;
  virtual std::size_t dim() const = 0;
  /// `image` holds values in [-1, 1].
  virtual std::vector<double> extract(const PlanarImage& image) const = 0;
};

/// Area-downsample to grid x grid, flatten, project with a seeded Gaussian
/// matrix (entries N(0, 1/n)) to `dim` outputs, then tanh.
class ProjectionExtractor final : public FeatureExtractor {
 public:
  explicit ProjectionExtractor(std::size_t dim = 64, std::uint64_t seed = 1234, std::size_t grid = 16,
                               std::size_t channels = 3)
      : dim_(dim), seed_(seed), grid_(grid), channels_(channels), weights_(dim, grid * grid * channels) {
    Rng rng(seed);
    std::normal_distribution<double> dist(0.0, 1.0 / std::sqrt(static_cast<double>(grid * grid * channels)));
    for (Eigen::Index r = 0; r < weights_.rows(); ++r) {
      for (Eigen::Index c = 0; c < weights_.cols(); ++c) weights_(r, c) = dist(rng);
    }
  }

  std::string name() const override {
    return "proj" + std::to_string(grid_) + "x" + std::to_string(grid_) + "-d" + std::to_string(dim_) + "-seed" +
           std::to_string(seed_);
  }
  std::size_t dim() const override { return dim_; }

  std::vector<double> extract(const PlanarImage& image) const override {
    PlanarImage img = image;
    if (img.channels == 1 && channels_ == 3) {
      img = PlanarImage(3, image.height, image.width);
      for (std::size_t c = 0; c < 3; ++c) std::copy(image.data.begin(), image.data.end(), img.data.begin() + static_cast<std::ptrdiff_t>(c * image.data.size()));
    }
    if (img.channels != channels_) throw ShapeError("feature extractor expects " + std::to_string(channels_) + " channels");
    Eigen::VectorXd x(static_cast<Eigen::Index>(grid_ * grid_ * channels_));
    if (img.height < grid_ || img.width < grid_) img = resize(img, grid_);
    for (std::size_t c = 0; c < channels_; ++c) {
      for (std::size_t gy = 0; gy < grid_; ++gy) {
        const std::size_t y0 = gy * img.height / grid_, y1 = (gy + 1) * img.height / grid_;
        for (std::size_t gx = 0; gx < grid_; ++gx) {
          const std::size_t x0 = gx * img.width / grid_, x1 = (gx + 1) * img.width / grid_;
          double acc = 0;
          for (std::size_t y = y0; y < y1; ++y) {
            for (std::size_t xx = x0; xx < x1; ++xx) acc += img.at(c, y, xx);
          }
          x(static_cast<Eigen::Index>((c * grid_ + gy) * grid_ + gx)) = acc / static_cast<double>((y1 - y0) * (x1 - x0));
        }
      }
    }
    const Eigen::VectorXd z = weights_ * x;
    std::vector<double> out(dim_);
    for (std::size_t i = 0; i < dim_; ++i) out[i] = std::tanh(z(static_cast<Eigen::Index>(i)));
    return out;
  }

 private:
  std::size_t dim_;
  std::uint64_t seed_;
  std::size_t grid_;
  std::size_t channels_;
  Eigen::MatrixXd weights_;
};

struct GaussianStats {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

/// Sample mean and unbiased (n - 1) covariance, symmetrized.
inline GaussianStats fit_gaussian(const std::vector<std::vector<double>>& features) {
  if (features.size() < 2) throw DomainError("fit_gaussian needs at least 2 samples");
  const auto d = static_cast<Eigen::Index>(features[0].size());
  Eigen::MatrixXd x(static_cast<Eigen::Index>(features.size()), d);
  for (std::size_t i = 0; i < features.size(); ++i) {
    if (static_cast<Eigen::Index>(features[i].size()) != d) throw ShapeError("fit_gaussian: ragged feature vectors");
    for (Eigen::Index j = 0; j < d; ++j) x(static_cast<Eigen::Index>(i), j) = features[i][static_cast<std::size_t>(j)];
  }
  GaussianStats s;
  s.mean = x.colwise().mean().transpose();
  const Eigen::MatrixXd centered = x.rowwise() - s.mean.transpose();
  const Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(features.size() - 1);
  s.cov = (cov + cov.transpose()) / 2.0;
  return s;
}

/// Square root of a symmetric PSD matrix by eigendecomposition. Eigenvalues
/// in [-1e-8 * max(1, lambda_max), 0) are clamped to 0; more negative ones
/// mean the input is not PSD.
inline Eigen::MatrixXd sqrt_psd(const Eigen::MatrixXd& m) {
  const Eigen::MatrixXd sym = (m + m.transpose()) / 2.0;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(sym);
  if (solver.info() != Eigen::Success) throw NumericError("eigendecomposition did not converge");
  Eigen::VectorXd lambda = solver.eigenvalues();
  const double tol = 1e-8 * std::max(1.0, lambda.size() > 0 ? lambda.maxCoeff() : 0.0);
  for (Eigen::Index i = 0; i < lambda.size(); ++i) {
    if (lambda(i) < -tol) throw DomainError("matrix is not positive semi-definite (eigenvalue " + std::to_string(lambda(i)) + ")");
    lambda(i) = std::sqrt(std::max(0.0, lambda(i)));
  }
  return solver.eigenvectors() * lambda.asDiagonal() * solver.eigenvectors().transpose();
}

/// ||mu_p - mu_q||^2 + Tr(S_p + S_q - 2 (S_p^1/2 S_q S_p^1/2)^1/2).
inline double frechet_distance(const GaussianStats& p, const GaussianStats& q) {
  if (p.mean.size() != q.mean.size() || p.cov.rows() != q.cov.rows() || p.cov.rows() != p.mean.size() ||
      q.cov.cols() != q.cov.rows() || p.cov.cols() != p.cov.rows()) {
    throw ShapeError("frechet_distance: dimension mismatch");
  }
  const Eigen::MatrixXd root_p = sqrt_psd(p.cov);
  const Eigen::MatrixXd inner = root_p * q.cov * root_p;
  const Eigen::MatrixXd cross = sqrt_psd(inner);
  const double value = (p.mean - q.mean).squaredNorm() + p.cov.trace() + q.cov.trace() - 2.0 * cross.trace();
  return std::max(0.0, value);
}

struct LabeledImage {
  std::string id;
  PlanarImage image;  // values in [-1, 1]
};

inline double compute_fid(const std::vector<LabeledImage>& a, const std::vector<LabeledImage>& b,
                          const FeatureExtractor& extractor) {
  auto features = [&](const std::vector<LabeledImage>& set) {
    std::vector<std::vector<double>> f;
    f.reserve(set.size());
    for (const auto& img : set) f.push_back(extractor.extract(img.image));
    return f;
  };
  return frechet_distance(fit_gaussian(features(a)), fit_gaussian(features(b)));
}

/// [-1, 1] to [0, 1].
inline PlanarImage to_unit_range(const PlanarImage& img) {
  PlanarImage out = img;
  for (auto& v : out.data) v = (v + 1.0F) * 0.5F;
  return out;
}

struct MetricRecord {
  std::size_t epoch = 0;
  double fid = 0;
  double ssim_mean = 0;
  double ssim_std = 0;
  std::size_t sample_size = 0;
};

/// SSIM statistics over aligned (generated, reference) pairs on the [0, 1]
/// representation, and FID between the two sets. Pairs must match by id at
/// every position. ssim_std uses the n - 1 divisor.
inline MetricRecord evaluate_sample(const std::vector<LabeledImage>& generated,
                                    const std::vector<LabeledImage>& references, const FeatureExtractor& extractor,
                                    const SsimConfig& cfg = {}) {
  if (generated.size() != references.size()) {
    throw UsageError("evaluate_sample: " + std::to_string(generated.size()) + " generated vs " +
                     std::to_string(references.size()) + " reference images");
  }
  if (generated.size() < 2) throw DomainError("evaluate_sample needs at least 2 images");
  std::vector<double> scores;
  for (std::size_t i = 0; i < generated.size(); ++i) {
    if (generated[i].id != references[i].id) {
      throw UsageError("evaluate_sample: misaligned ids at position " + std::to_string(i) + " ('" +
                       generated[i].id + "' vs '" + references[i].id + "')");
    }
    scores.push_back(ssim(to_unit_range(generated[i].image), to_unit_range(references[i].image), cfg));
  }
  MetricRecord r;
  r.sample_size = generated.size();
  double total = 0;
  for (double s : scores) total += s;
  r.ssim_mean = total / static_cast<double>(scores.size());
  double sq = 0;
  for (double s : scores) sq += (s - r.ssim_mean) * (s - r.ssim_mean);
  r.ssim_std = std::sqrt(sq / static_cast<double>(scores.size() - 1));
  r.fid = compute_fid(generated, references, extractor);
  return r;
}

inline constexpr const char* kMetricsHeader = "epoch,fid,ssim_mean,ssim_std,sample_size";

inline std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

inline std::string metrics_row(const MetricRecord& r) {
  return std::to_string(r.epoch) + "," + format_number(r.fid) + "," + format_number(r.ssim_mean) + "," +
         format_number(r.ssim_std) + "," + std::to_string(r.sample_size);
}

inline void write_metrics_csv(const std::filesystem::path& path, const std::vector<MetricRecord>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << kMetricsHeader << '\n';
  for (const auto& r : records) out << metrics_row(r) << '\n';
  if (!out) throw IoError("failed writing " + path.string());
}

inline void append_metrics_csv(const std::filesystem::path& path, const MetricRecord& r) {
  const bool fresh = !std::filesystem::exists(path) || std::filesystem::file_size(path) == 0;
  std::ofstream out(path, std::ios::binary | std::ios::app);
  if (!out) throw IoError("cannot append to " + path.string());
  if (fresh) out << kMetricsHeader << '\n';
  out << metrics_row(r) << '\n';
}

inline std::vector<MetricRecord> read_metrics_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kMetricsHeader) {
    throw FormatError(path.string() + ": missing header '" + kMetricsHeader + "'");
  }
  std::vector<MetricRecord> records;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 5) throw FormatError(path.string() + ":" + std::to_string(lineno) + ": expected 5 columns");
    try {
      records.push_back({std::stoull(cells[0]), std::stod(cells[1]), std::stod(cells[2]), std::stod(cells[3]),
                         std::stoull(cells[4])});
    } catch (const std::exception&) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": unparsable number");
    }
  }
  return records;
}

}  // namespace inkgan
