#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "inkgan/random.hpp"
#include "inkgan/tensor.hpp"

namespace inkgan {

/// Running statistics of a batch-norm layer.
template <typename T>
struct NormBuffers {
  std::vector<T> running_mean;
  std::vector<T> running_var;

  explicit NormBuffers(std::size_t channels = 0) : running_mean(channels, T(0)), running_var(channels, T(1)) {}
};

namespace detail {

// Statistics layout shared by batch norm (one slot per channel) and instance
// norm (one slot per item and channel).
template <typename T>
struct NormPlan {
  std::size_t batch, channels, plane;
  bool per_instance;
  std::size_t groups() const { return per_instance ? batch * channels : channels; }
  std::size_t slot(std::size_t b, std::size_t c) const { return per_instance ? b * channels + c : c; }
  std::size_t count() const { return per_instance ? plane : batch * plane; }
};

template <typename T>
void require_norm_args(const BasicTensor<T>& x, const BasicTensor<T>& gamma, const BasicTensor<T>& beta,
                       const char* op) {
  if (x.rank() != 4) throw ShapeError(std::string(op) + " expects [B,C,H,W], got " + to_string(x.shape()));
  const Shape expect{x.dim(1)};
  if (gamma.shape() != expect || beta.shape() != expect) {
    throw ShapeError(std::string(op) + ": affine parameters must have shape " + to_string(expect));
  }
}

// y = gamma * (x - mean) * inv_std + beta, with mean/inv_std either computed
// from the data (differentiated through) or fixed (eval mode).
template <typename T>
BasicTensor<T> normalize_affine(const char* op, const BasicTensor<T>& x, const BasicTensor<T>& gamma,
                                const BasicTensor<T>& beta, const NormPlan<T>& plan, std::vector<T> mean,
                                std::vector<T> inv_std, bool stats_from_batch) {
  std::vector<T> xhat(x.numel());
  std::vector<T> y(x.numel());
  auto xv = x.values();
  for (std::size_t b = 0; b < plan.batch; ++b) {
    for (std::size_t c = 0; c < plan.channels; ++c) {
      const std::size_t s = plan.slot(b, c);
      const std::size_t base = (b * plan.channels + c) * plan.plane;
      for (std::size_t i = 0; i < plan.plane; ++i) {
        xhat[base + i] = (xv[base + i] - mean[s]) * inv_std[s];
        y[base + i] = gamma[c] * xhat[base + i] + beta[c];
      }
    }
  }
  return BasicTensor<T>::make_result(
      op, x.shape(), std::move(y), {x, gamma, beta},
      [plan, xhat = std::move(xhat), inv_std = std::move(inv_std), stats_from_batch](Node<T>& self) {
        auto& xin = *self.inputs[0];
        auto& gin = *self.inputs[1];
        auto& bin = *self.inputs[2];
        const auto& gam = *gin.value;
        const auto& dy = self.grad;
        std::vector<T> sum_dy(plan.groups(), T(0)), sum_dy_xhat(plan.groups(), T(0));
        std::vector<T> dgamma(plan.channels, T(0)), dbeta(plan.channels, T(0));
        for (std::size_t b = 0; b < plan.batch; ++b) {
          for (std::size_t c = 0; c < plan.channels; ++c) {
            const std::size_t s = plan.slot(b, c);
            const std::size_t base = (b * plan.channels + c) * plan.plane;
            T a = T(0), d = T(0);
            for (std::size_t i = 0; i < plan.plane; ++i) {
              a += dy[base + i];
              d += dy[base + i] * xhat[base + i];
            }
            sum_dy[s] += a;
            sum_dy_xhat[s] += d;
            dbeta[c] += a;
            dgamma[c] += d;
          }
        }
        if (gin.requires_grad) {
          auto g = gin.grad_buffer();
          for (std::size_t c = 0; c < plan.channels; ++c) g[c] += dgamma[c];
        }
        if (bin.requires_grad) {
          auto g = bin.grad_buffer();
          for (std::size_t c = 0; c < plan.channels; ++c) g[c] += dbeta[c];
        }
        if (!xin.requires_grad) return;
        auto dx = xin.grad_buffer();
        const T n = static_cast<T>(plan.count());
        for (std::size_t b = 0; b < plan.batch; ++b) {
          for (std::size_t c = 0; c < plan.channels; ++c) {
            const std::size_t s = plan.slot(b, c);
            const std::size_t base = (b * plan.channels + c) * plan.plane;
            const T k = gam[c] * inv_std[s];
            if (stats_from_batch) {
              const T m_dy = sum_dy[s] / n;
              const T m_dyx = sum_dy_xhat[s] / n;
              for (std::size_t i = 0; i < plan.plane; ++i) {
                dx[base + i] += k * (dy[base + i] - m_dy - xhat[base + i] * m_dyx);
              }
            } else {
              for (std::size_t i = 0; i < plan.plane; ++i) dx[base + i] += k * dy[base + i];
            }
          }
        }
      });
}

template <typename T>
void group_stats(const BasicTensor<T>& x, const NormPlan<T>& plan, std::vector<T>& mean, std::vector<T>& var) {
  mean.assign(plan.groups(), T(0));
  var.assign(plan.groups(), T(0));
  auto xv = x.values();
  for (std::size_t b = 0; b < plan.batch; ++b) {
    for (std::size_t c = 0; c < plan.channels; ++c) {
      const std::size_t base = (b * plan.channels + c) * plan.plane;
      T acc = T(0);
      for (std::size_t i = 0; i < plan.plane; ++i) acc += xv[base + i];
      mean[plan.slot(b, c)] += acc;
    }
  }
  const T n = static_cast<T>(plan.count());
  for (auto& m : mean) m /= n;
  for (std::size_t b = 0; b < plan.batch; ++b) {
    for (std::size_t c = 0; c < plan.channels; ++c) {
      const std::size_t s = plan.slot(b, c);
      const std::size_t base = (b * plan.channels + c) * plan.plane;
      T acc = T(0);
      for (std::size_t i = 0; i < plan.plane; ++i) {
        const T d = xv[base + i] - mean[s];
        acc += d * d;
      }
      var[s] += acc;
    }
  }
  for (auto& v : var) v /= n;
}

}  // namespace detail

/// Batch normalization over (B, H, W) per channel. Train mode normalizes with
/// batch statistics and updates the running estimates (unbiased variance);
/// eval mode uses the running estimates.
template <typename T>
BasicTensor<T> batch_norm(const BasicTensor<T>& x, const BasicTensor<T>& gamma, const BasicTensor<T>& beta,
                          NormBuffers<T>& buffers, Mode mode, T momentum = T(0.1), T eps = T(1e-5)) {
  detail::require_norm_args(x, gamma, beta, "batch_norm");
  const detail::NormPlan<T> plan{x.dim(0), x.dim(1), x.dim(2) * x.dim(3), false};
  if (buffers.running_mean.size() != plan.channels || buffers.running_var.size() != plan.channels) {
    throw ShapeError("batch_norm: running statistics sized for a different channel count");
  }
  std::vector<T> mean, var;
  if (mode == Mode::train) {
    detail::group_stats(x, plan, mean, var);
    const T n = static_cast<T>(plan.count());
    const T unbias = n > T(1) ? n / (n - T(1)) : T(1);
    for (std::size_t c = 0; c < plan.channels; ++c) {
      buffers.running_mean[c] = (T(1) - momentum) * buffers.running_mean[c] + momentum * mean[c];
      buffers.running_var[c] = (T(1) - momentum) * buffers.running_var[c] + momentum * var[c] * unbias;
    }
  } else {
    mean = buffers.running_mean;
    var = buffers.running_var;
  }
  std::vector<T> inv_std(var.size());
  for (std::size_t i = 0; i < var.size(); ++i) inv_std[i] = T(1) / std::sqrt(var[i] + eps);
  return detail::normalize_affine("batch_norm", x, gamma, beta, plan, std::move(mean), std::move(inv_std),
                                  mode == Mode::train);
}

/// Instance normalization: statistics per (item, channel) in both modes.
template <typename T>
BasicTensor<T> instance_norm(const BasicTensor<T>& x, const BasicTensor<T>& gamma, const BasicTensor<T>& beta,
                             T eps = T(1e-5)) {
  detail::require_norm_args(x, gamma, beta, "instance_norm");
  const detail::NormPlan<T> plan{x.dim(0), x.dim(1), x.dim(2) * x.dim(3), true};
  std::vector<T> mean, var;
  detail::group_stats(x, plan, mean, var);
  std::vector<T> inv_std(var.size());
  for (std::size_t i = 0; i < var.size(); ++i) inv_std[i] = T(1) / std::sqrt(var[i] + eps);
  return detail::normalize_affine("instance_norm", x, gamma, beta, plan, std::move(mean), std::move(inv_std), true);
}

/// Keep-mask for dropout: element i survives iff uniform(seed stream) >= rate.
inline std::vector<bool> dropout_mask(std::size_t n, double rate, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<bool> keep(n);
  for (std::size_t i = 0; i < n; ++i) keep[i] = uniform01(rng) >= rate;
  return keep;
}

/// Inverted dropout. Train mode zeroes elements with probability `rate` and
/// scales survivors by 1/(1-rate); eval mode is the identity.
template <typename T>
BasicTensor<T> dropout(const BasicTensor<T>& x, double rate, Mode mode, std::uint64_t seed) {
  if (!(rate >= 0.0 && rate < 1.0)) throw ConfigError("dropout rate must be in [0, 1), got " + std::to_string(rate));
  if (mode == Mode::eval || rate == 0.0) return x;
  const auto keep = dropout_mask(x.numel(), rate, seed);
  const T scale = T(1.0 / (1.0 - rate));
  std::vector<T> y(x.numel());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = keep[i] ? x[i] * scale : T(0);
  return BasicTensor<T>::make_result("dropout", x.shape(), std::move(y), {x}, [keep, scale](detail::Node<T>& self) {
    auto g = self.inputs[0]->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (keep[i]) g[i] += self.grad[i] * scale;
    }
  });
}

}  // namespace inkgan
