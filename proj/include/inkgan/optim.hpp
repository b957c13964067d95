#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "inkgan/tensor.hpp"

namespace inkgan {

struct AdamHyper {
  double alpha = 0.0002;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double epsilon = 1e-7;
};

/// Moment buffers for one network, aligned with its parameter list.
template <typename T>
struct BasicAdamState {
  AdamHyper hyper;
  std::uint64_t step = 0;
  std::vector<std::vector<T>> m;
  std::vector<std::vector<T>> v;
};

using AdamState = BasicAdamState<float>;

template <typename T>
BasicAdamState<T> make_adam_state(const std::vector<NamedTensor<T>>& params, AdamHyper hyper = {}) {
  BasicAdamState<T> s;
  s.hyper = hyper;
  for (const auto& p : params) {
    s.m.emplace_back(p.tensor.numel(), T(0));
    s.v.emplace_back(p.tensor.numel(), T(0));
  }
  return s;
}

template <typename T>
void zero_grads(std::vector<NamedTensor<T>>& params) {
  for (auto& p : params) p.tensor.zero_grad();
}

/// One bias-corrected Adam update:
///   m <- b1 m + (1 - b1) g,  v <- b2 v + (1 - b2) g^2,
///   theta <- theta - alpha * m_hat / (sqrt(v_hat) + eps).
/// Parameters that received no gradient are updated with g = 0. Gradients are
/// cleared afterwards. Nothing is modified if any gradient is non-finite.
template <typename T>
void adam_step(std::vector<NamedTensor<T>>& params, BasicAdamState<T>& state) {
  if (state.m.size() != params.size() || state.v.size() != params.size()) {
    throw ShapeError("adam state tracks " + std::to_string(state.m.size()) + " parameters, network has " +
                     std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& p = params[i].tensor;
    if (state.m[i].size() != p.numel() || state.v[i].size() != p.numel()) {
      throw ShapeError("adam state shape mismatch for parameter '" + params[i].name + "'");
    }
    for (T g : p.grad()) {
      if (!std::isfinite(g)) throw NumericError("non-finite gradient in parameter '" + params[i].name + "'");
    }
  }
  ++state.step;
  const auto t = static_cast<double>(state.step);
  const T b1 = static_cast<T>(state.hyper.beta1);
  const T b2 = static_cast<T>(state.hyper.beta2);
  const T bc1 = static_cast<T>(1.0 - std::pow(state.hyper.beta1, t));
  const T bc2 = static_cast<T>(1.0 - std::pow(state.hyper.beta2, t));
  const T alpha = static_cast<T>(state.hyper.alpha);
  const T eps = static_cast<T>(state.hyper.epsilon);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i].tensor;
    auto theta = p.mutable_values();
    auto grad = p.grad();
    auto& m = state.m[i];
    auto& v = state.v[i];
    for (std::size_t j = 0; j < theta.size(); ++j) {
      const T g = grad.empty() ? T(0) : grad[j];
      m[j] = b1 * m[j] + (T(1) - b1) * g;
      v[j] = b2 * v[j] + (T(1) - b2) * g * g;
      const T m_hat = m[j] / bc1;
      const T v_hat = v[j] / bc2;
      theta[j] -= alpha * m_hat / (std::sqrt(v_hat) + eps);
    }
  }
  zero_grads(params);
}

}  // namespace inkgan
