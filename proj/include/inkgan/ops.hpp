#pragma once

// Pointwise, reduction and structural ops. Binary ops never broadcast: both
// operands must have identical shapes.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "inkgan/tensor.hpp"

namespace inkgan {

namespace detail {

template <typename T>
void require_same_shape(const BasicTensor<T>& a, const BasicTensor<T>& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + to_string(a.shape()) + " vs " +
                     to_string(b.shape()));
  }
}

// y = f(x) with dy/dx = df(x, y).
template <typename T, typename F, typename DF>
BasicTensor<T> map_unary(const char* op, const BasicTensor<T>& x, F f, DF df) {
  auto xv = x.values();
  std::vector<T> y(xv.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = f(xv[i]);
  return BasicTensor<T>::make_result(op, x.shape(), std::move(y), {x}, [df](Node<T>& self) {
    auto& in = *self.inputs[0];
    const auto& xs = *in.value;
    const auto& ys = *self.value;
    auto g = in.grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * df(xs[i], ys[i]);
  });
}

template <typename T>
T stable_sigmoid(T v) {
  if (v >= T(0)) return T(1) / (T(1) + std::exp(-v));
  const T e = std::exp(v);
  return e / (T(1) + e);
}

}  // namespace detail

template <typename T>
BasicTensor<T> relu(const BasicTensor<T>& x) {
  return detail::map_unary(
      "relu", x, [](T v) { return v > T(0) ? v : T(0); }, [](T v, T) { return v > T(0) ? T(1) : T(0); });
}

template <typename T>
BasicTensor<T> leaky_relu(const BasicTensor<T>& x, T slope = T(0.2)) {
  return detail::map_unary(
      "leaky_relu", x, [slope](T v) { return v > T(0) ? v : slope * v; },
      [slope](T v, T) { return v > T(0) ? T(1) : slope; });
}

template <typename T>
BasicTensor<T> tanh(const BasicTensor<T>& x) {
  return detail::map_unary(
      "tanh", x, [](T v) { return std::tanh(v); }, [](T, T y) { return T(1) - y * y; });
}

template <typename T>
BasicTensor<T> sigmoid(const BasicTensor<T>& x) {
  return detail::map_unary(
      "sigmoid", x, [](T v) { return detail::stable_sigmoid(v); }, [](T, T y) { return y * (T(1) - y); });
}

template <typename T>
BasicTensor<T> abs(const BasicTensor<T>& x) {
  return detail::map_unary(
      "abs", x, [](T v) { return std::abs(v); },
      [](T v, T) { return v > T(0) ? T(1) : (v < T(0) ? T(-1) : T(0)); });
}

template <typename T>
BasicTensor<T> log(const BasicTensor<T>& x) {
  for (T v : x.values()) {
    if (!(v > T(0))) throw DomainError("log of non-positive value " + std::to_string(v));
  }
  return detail::map_unary(
      "log", x, [](T v) { return std::log(v); }, [](T v, T) { return T(1) / v; });
}

/// log(1 + e^x), evaluated without overflow.
template <typename T>
BasicTensor<T> softplus(const BasicTensor<T>& x) {
  return detail::map_unary(
      "softplus", x, [](T v) { return std::max(v, T(0)) + std::log1p(std::exp(-std::abs(v))); },
      [](T v, T) { return detail::stable_sigmoid(v); });
}

template <typename T>
BasicTensor<T> scalar_mul(const BasicTensor<T>& x, T s) {
  return detail::map_unary(
      "scalar_mul", x, [s](T v) { return s * v; }, [s](T, T) { return s; });
}

template <typename T>
BasicTensor<T> add_scalar(const BasicTensor<T>& x, T s) {
  return detail::map_unary(
      "add_scalar", x, [s](T v) { return v + s; }, [](T, T) { return T(1); });
}

enum class Unary { relu, leaky_relu, tanh, sigmoid, abs, log, softplus };

inline const char* name(Unary kind) {
  switch (kind) {
    case Unary::relu: return "relu";
    case Unary::leaky_relu: return "leaky_relu";
    case Unary::tanh: return "tanh";
    case Unary::sigmoid: return "sigmoid";
    case Unary::abs: return "abs";
    case Unary::log: return "log";
    case Unary::softplus: return "softplus";
  }
  return "?";
}

template <typename T>
BasicTensor<T> apply(Unary kind, const BasicTensor<T>& x) {
  switch (kind) {
    case Unary::relu: return relu(x);
    case Unary::leaky_relu: return leaky_relu(x, T(0.2));
    case Unary::tanh: return tanh(x);
    case Unary::sigmoid: return sigmoid(x);
    case Unary::abs: return abs(x);
    case Unary::log: return log(x);
    case Unary::softplus: return softplus(x);
  }
  throw UsageError("unknown unary op");
}

template <typename T>
BasicTensor<T> add(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  detail::require_same_shape(a, b, "add");
  std::vector<T> y(a.numel());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a[i] + b[i];
  return BasicTensor<T>::make_result("add", a.shape(), std::move(y), {a, b}, [](detail::Node<T>& self) {
    for (auto& in : self.inputs) {
      if (!in->requires_grad) continue;
      auto g = in->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
  });
}

template <typename T>
BasicTensor<T> sub(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  detail::require_same_shape(a, b, "sub");
  std::vector<T> y(a.numel());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a[i] - b[i];
  return BasicTensor<T>::make_result("sub", a.shape(), std::move(y), {a, b}, [](detail::Node<T>& self) {
    const T sign[2] = {T(1), T(-1)};
    for (std::size_t k = 0; k < 2; ++k) {
      auto& in = *self.inputs[k];
      if (!in.requires_grad) continue;
      auto g = in.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += sign[k] * self.grad[i];
    }
  });
}

template <typename T>
BasicTensor<T> mul(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  detail::require_same_shape(a, b, "mul");
  std::vector<T> y(a.numel());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a[i] * b[i];
  return BasicTensor<T>::make_result("mul", a.shape(), std::move(y), {a, b}, [](detail::Node<T>& self) {
    auto& in0 = *self.inputs[0];
    auto& in1 = *self.inputs[1];
    const auto& v0 = *in0.value;
    const auto& v1 = *in1.value;
    if (in0.requires_grad) {
      auto g = in0.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * v1[i];
    }
    if (in1.requires_grad) {
      auto g = in1.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * v0[i];
    }
  });
}

template <typename T>
BasicTensor<T> operator+(const BasicTensor<T>& a, const BasicTensor<T>& b) { return add(a, b); }
template <typename T>
BasicTensor<T> operator-(const BasicTensor<T>& a, const BasicTensor<T>& b) { return sub(a, b); }
template <typename T>
BasicTensor<T> operator*(const BasicTensor<T>& a, const BasicTensor<T>& b) { return mul(a, b); }
template <typename T>
BasicTensor<T> operator*(T s, const BasicTensor<T>& a) { return scalar_mul(a, s); }

enum class Reduce { sum, mean };

template <typename T>
BasicTensor<T> reduce(Reduce kind, const BasicTensor<T>& x) {
  if (!x.defined() || x.numel() == 0) throw DomainError("reduction of an empty tensor");
  const auto n = x.numel();
  T total = T(0);
  for (T v : x.values()) total += v;
  const T scale = kind == Reduce::mean ? T(1) / static_cast<T>(n) : T(1);
  if (kind == Reduce::mean) total /= static_cast<T>(n);
  return BasicTensor<T>::make_result(kind == Reduce::mean ? "mean" : "sum", Shape{1}, {total}, {x},
                                     [scale](detail::Node<T>& self) {
                                       auto g = self.inputs[0]->grad_buffer();
                                       const T d = self.grad[0] * scale;
                                       for (auto& v : g) v += d;
                                     });
}

template <typename T>
BasicTensor<T> sum(const BasicTensor<T>& x) { return reduce(Reduce::sum, x); }
template <typename T>
BasicTensor<T> mean(const BasicTensor<T>& x) { return reduce(Reduce::mean, x); }

namespace detail {
// Splits a shape around `axis` into (outer, extent, inner) element counts.
inline void split_axis(const Shape& s, std::size_t axis, std::size_t& outer, std::size_t& inner) {
  outer = 1;
  inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= s[i];
  for (std::size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
}
}  // namespace detail

/// Concatenation along `axis`; every other extent must agree.
template <typename T>
BasicTensor<T> concat(const std::vector<BasicTensor<T>>& parts, std::size_t axis = 1) {
  if (parts.empty()) throw ShapeError("concat of zero tensors");
  Shape out_shape = parts[0].shape();
  if (axis >= out_shape.size()) throw ShapeError("concat axis out of range");
  out_shape[axis] = 0;
  for (const auto& p : parts) {
    Shape s = p.shape();
    if (s.size() != out_shape.size()) throw ShapeError("concat rank mismatch");
    out_shape[axis] += s[axis];
    s[axis] = 0;
    Shape ref = parts[0].shape();
    ref[axis] = 0;
    if (s != ref) throw ShapeError("concat extents differ: " + to_string(p.shape()) + " vs " + to_string(parts[0].shape()));
  }
  std::size_t outer = 0, inner = 0;
  detail::split_axis(out_shape, axis, outer, inner);
  std::vector<std::size_t> widths;
  for (const auto& p : parts) widths.push_back(p.shape()[axis] * inner);
  const std::size_t row = out_shape[axis] * inner;
  std::vector<T> y(outer * row);
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    auto v = parts[k].values();
    for (std::size_t o = 0; o < outer; ++o) {
      std::copy_n(v.begin() + o * widths[k], widths[k], y.begin() + o * row + offset);
    }
    offset += widths[k];
  }
  return BasicTensor<T>::make_result("concat", out_shape, std::move(y), parts,
                                     [widths, outer, row](detail::Node<T>& self) {
                                       std::size_t off = 0;
                                       for (std::size_t k = 0; k < self.inputs.size(); ++k) {
                                         auto& in = *self.inputs[k];
                                         if (in.requires_grad) {
                                           auto g = in.grad_buffer();
                                           for (std::size_t o = 0; o < outer; ++o) {
                                             for (std::size_t i = 0; i < widths[k]; ++i) {
                                               g[o * widths[k] + i] += self.grad[o * row + off + i];
                                             }
                                           }
                                         }
                                         off += widths[k];
                                       }
                                     });
}

/// Slice [start, start + length) along `axis`.
template <typename T>
BasicTensor<T> narrow(const BasicTensor<T>& x, std::size_t axis, std::size_t start, std::size_t length) {
  const Shape& s = x.shape();
  if (axis >= s.size() || length == 0 || start + length > s[axis]) {
    throw ShapeError("narrow(axis=" + std::to_string(axis) + ", start=" + std::to_string(start) +
                     ", length=" + std::to_string(length) + ") out of range for " + to_string(s));
  }
  std::size_t outer = 0, inner = 0;
  detail::split_axis(s, axis, outer, inner);
  Shape out_shape = s;
  out_shape[axis] = length;
  const std::size_t src_row = s[axis] * inner;
  const std::size_t dst_row = length * inner;
  const std::size_t off = start * inner;
  std::vector<T> y(outer * dst_row);
  auto v = x.values();
  for (std::size_t o = 0; o < outer; ++o) {
    std::copy_n(v.begin() + o * src_row + off, dst_row, y.begin() + o * dst_row);
  }
  return BasicTensor<T>::make_result("narrow", out_shape, std::move(y), {x},
                                     [outer, src_row, dst_row, off](detail::Node<T>& self) {
                                       auto g = self.inputs[0]->grad_buffer();
                                       for (std::size_t o = 0; o < outer; ++o) {
                                         for (std::size_t i = 0; i < dst_row; ++i) {
                                           g[o * src_row + off + i] += self.grad[o * dst_row + i];
                                         }
                                       }
                                     });
}

/// Adds bias[c] to every element of channel c of an NCHW tensor.
template <typename T>
BasicTensor<T> bias_add(const BasicTensor<T>& x, const BasicTensor<T>& bias) {
  if (x.rank() != 4 || bias.rank() != 1 || bias.dim(0) != x.dim(1)) {
    throw ShapeError("bias_add expects [B,C,H,W] and [C], got " + to_string(x.shape()) + " and " +
                     to_string(bias.shape()));
  }
  const std::size_t batch = x.dim(0), channels = x.dim(1), plane = x.dim(2) * x.dim(3);
  std::vector<T> y(x.values().begin(), x.values().end());
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t c = 0; c < channels; ++c) {
      T* p = y.data() + (b * channels + c) * plane;
      for (std::size_t i = 0; i < plane; ++i) p[i] += bias[c];
    }
  }
  return BasicTensor<T>::make_result("bias_add", x.shape(), std::move(y), {x, bias},
                                     [batch, channels, plane](detail::Node<T>& self) {
                                       auto& in = *self.inputs[0];
                                       auto& bn = *self.inputs[1];
                                       if (in.requires_grad) {
                                         auto g = in.grad_buffer();
                                         for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
                                       }
                                       if (bn.requires_grad) {
                                         auto g = bn.grad_buffer();
                                         for (std::size_t b = 0; b < batch; ++b) {
                                           for (std::size_t c = 0; c < channels; ++c) {
                                             const T* p = self.grad.data() + (b * channels + c) * plane;
                                             T acc = T(0);
                                             for (std::size_t i = 0; i < plane; ++i) acc += p[i];
                                             g[c] += acc;
                                           }
                                         }
                                       }
                                     });
}

}  // namespace inkgan
