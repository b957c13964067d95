#pragma once

// Shared helpers for the test suites: random tensors, a central-difference
// gradient checker, and straightforward reference implementations used as
// oracles against the optimized library code.

#include <unistd.h>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "inkgan/inkgan.hpp"

namespace testing_support {

using inkgan::Shape;

template <typename T>
inkgan::BasicTensor<T> random_tensor(const Shape& shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0,
                                     double min_abs = 0.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<T> v(inkgan::numel(shape));
  for (auto& x : v) {
    double d = dist(rng);
    while (std::abs(d) < min_abs) d = dist(rng);
    x = static_cast<T>(d);
  }
  return inkgan::BasicTensor<T>(shape, std::move(v));
}

struct GradCheck {
  double max_rel_error = 0;
  std::string worst;
};

/// Compares backward() against central differences of `fn` for every input
/// (or only `sample_indices` of each). Relative error per input:
/// ||a - n|| / max(||a||, ||n||, 1e-10).
template <typename T>
GradCheck grad_check(const std::function<inkgan::BasicTensor<T>(const std::vector<inkgan::BasicTensor<T>>&)>& fn,
                     std::vector<inkgan::BasicTensor<T>> inputs, double h = 1e-3,
                     std::vector<std::size_t> sample_indices = {}) {
  for (auto& x : inputs) {
    x.set_requires_grad(true);
    x.zero_grad();
  }
  auto loss = fn(inputs);
  inkgan::backward(loss);
  GradCheck result;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    auto& x = inputs[k];
    const std::vector<T> analytic(x.grad().begin(), x.grad().end());
    std::vector<std::size_t> idx = sample_indices;
    if (idx.empty()) {
      idx.resize(x.numel());
      for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    }
    double diff2 = 0, a2 = 0, n2 = 0;
    for (std::size_t i : idx) {
      if (i >= x.numel()) continue;
      const T saved = x.values()[i];
      double f_plus, f_minus;
      {
        inkgan::NoGradGuard guard;
        x.mutable_values()[i] = static_cast<T>(saved + h);
        f_plus = static_cast<double>(fn(inputs).item());
        x.mutable_values()[i] = static_cast<T>(saved - h);
        f_minus = static_cast<double>(fn(inputs).item());
        x.mutable_values()[i] = saved;
      }
      const double numeric = (f_plus - f_minus) / (2 * h);
      const double a = analytic[i];
      diff2 += (a - numeric) * (a - numeric);
      a2 += a * a;
      n2 += numeric * numeric;
    }
    const double rel = std::sqrt(diff2) / std::max({std::sqrt(a2), std::sqrt(n2), 1e-10});
    if (rel > result.max_rel_error) {
      result.max_rel_error = rel;
      result.worst = "input " + std::to_string(k);
    }
  }
  return result;
}

/// Nested-loop total variation of an NCHW value buffer.
inline double tv_oracle(const std::vector<double>& v, std::size_t b, std::size_t c, std::size_t h, std::size_t w) {
  double total = 0;
  for (std::size_t n = 0; n < b * c; ++n) {
    const double* img = v.data() + n * h * w;
    for (std::size_t i = 0; i < h; ++i) {
      for (std::size_t j = 0; j < w; ++j) {
        if (i + 1 < h) total += std::abs(img[(i + 1) * w + j] - img[i * w + j]);
        if (j + 1 < w) total += std::abs(img[i * w + j + 1] - img[i * w + j]);
      }
    }
  }
  return total;
}

/// SSIM by explicit per-window loops: for every valid window position the
/// weighted means, variances and covariance are summed directly.
inline double ssim_oracle(const inkgan::PlanarImage& a, const inkgan::PlanarImage& b, const std::vector<double>& taps,
                          double k1 = 0.01, double k2 = 0.03, double range = 1.0) {
  const std::size_t n = taps.size();
  const double c1 = (k1 * range) * (k1 * range), c2 = (k2 * range) * (k2 * range);
  double total = 0;
  std::size_t count = 0;
  for (std::size_t c = 0; c < a.channels; ++c) {
    for (std::size_t y0 = 0; y0 + n <= a.height; ++y0) {
      for (std::size_t x0 = 0; x0 + n <= a.width; ++x0) {
        double mu_a = 0, mu_b = 0;
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t j = 0; j < n; ++j) {
            const double wgt = taps[i] * taps[j];
            mu_a += wgt * a.at(c, y0 + i, x0 + j);
            mu_b += wgt * b.at(c, y0 + i, x0 + j);
          }
        }
        double var_a = 0, var_b = 0, cov = 0;
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t j = 0; j < n; ++j) {
            const double wgt = taps[i] * taps[j];
            const double da = a.at(c, y0 + i, x0 + j) - mu_a, db = b.at(c, y0 + i, x0 + j) - mu_b;
            var_a += wgt * da * da;
            var_b += wgt * db * db;
            cov += wgt * da * db;
          }
        }
        total += ((2 * mu_a * mu_b + c1) * (2 * cov + c2)) /
                 ((mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2));
        ++count;
      }
    }
  }
  return total / static_cast<double>(count);
}

/// Direct nested-loop cross-correlation, NCHW, kernel [Cout,Cin,kh,kw].
inline std::vector<double> conv_oracle(const std::vector<double>& x, const Shape& xs, const std::vector<double>& k,
                                       const Shape& ks, std::size_t stride, std::size_t pad, Shape& out_shape) {
  const std::size_t B = xs[0], Cin = xs[1], H = xs[2], W = xs[3], Cout = ks[0], kh = ks[2], kw = ks[3];
  const std::size_t Ho = (H + 2 * pad - kh) / stride + 1, Wo = (W + 2 * pad - kw) / stride + 1;
  out_shape = {B, Cout, Ho, Wo};
  std::vector<double> out(B * Cout * Ho * Wo, 0.0);
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t o = 0; o < Cout; ++o)
      for (std::size_t i = 0; i < Ho; ++i)
        for (std::size_t j = 0; j < Wo; ++j) {
          double acc = 0;
          for (std::size_t c = 0; c < Cin; ++c)
            for (std::size_t u = 0; u < kh; ++u)
              for (std::size_t v = 0; v < kw; ++v) {
                const auto yy = static_cast<std::ptrdiff_t>(i * stride + u) - static_cast<std::ptrdiff_t>(pad);
                const auto xx = static_cast<std::ptrdiff_t>(j * stride + v) - static_cast<std::ptrdiff_t>(pad);
                if (yy < 0 || xx < 0 || yy >= static_cast<std::ptrdiff_t>(H) || xx >= static_cast<std::ptrdiff_t>(W)) continue;
                acc += x[((b * Cin + c) * H + static_cast<std::size_t>(yy)) * W + static_cast<std::size_t>(xx)] *
                       k[((o * Cin + c) * kh + u) * kw + v];
              }
          out[((b * Cout + o) * Ho + i) * Wo + j] = acc;
        }
  return out;
}

template <typename T>
std::vector<double> as_double(const inkgan::BasicTensor<T>& t) {
  return {t.values().begin(), t.values().end()};
}

/// Fresh scratch directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::uint64_t counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("inkgan-test-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace testing_support
