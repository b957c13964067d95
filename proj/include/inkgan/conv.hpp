#pragma once

// 2-D cross-correlation and its adjoint (transposed convolution), lowered to
// GEMM through im2col/col2im.
//
// Kernel layout for both ops is [C_a, C_b, kh, kw] where conv2d maps C_b input
// channels to C_a outputs and conv2d_transpose maps C_a inputs to C_b outputs,
// so conv2d_transpose(g, k) is exactly the input-gradient of conv2d(x, k).

#include <Eigen/Core>
#include <string>
#include <vector>

#include "inkgan/parallel.hpp"
#include "inkgan/tensor.hpp"

namespace inkgan {

/// Spatial extent of a conv output: floor((n + 2 pad - k) / stride) + 1.
constexpr std::size_t conv_out_extent(std::size_t n, std::size_t k, std::size_t stride, std::size_t pad) {
  return (n + 2 * pad - k) / stride + 1;
}

/// Spatial extent of a transposed conv output: (n - 1) stride - 2 pad + k.
constexpr std::size_t conv_transpose_out_extent(std::size_t n, std::size_t k, std::size_t stride,
                                                std::size_t pad) {
  return (n - 1) * stride + k - 2 * pad;
}

namespace detail {

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMatrix<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMatrix<T>>;

// Geometry of the "image" side of a convolution (the conv input).
struct ConvGeometry {
  std::size_t channels, height, width, kh, kw, stride, pad, out_h, out_w;
  std::size_t col_rows() const { return channels * kh * kw; }
  std::size_t col_cols() const { return out_h * out_w; }
  std::size_t image_size() const { return channels * height * width; }
};

template <typename T>
void im2col(const T* image, const ConvGeometry& g, T* col) {
  for (std::size_t c = 0; c < g.channels; ++c) {
    for (std::size_t ki = 0; ki < g.kh; ++ki) {
      for (std::size_t kj = 0; kj < g.kw; ++kj) {
        T* row = col + ((c * g.kh + ki) * g.kw + kj) * g.col_cols();
        for (std::size_t oy = 0; oy < g.out_h; ++oy) {
          const auto iy = static_cast<std::ptrdiff_t>(oy * g.stride + ki) - static_cast<std::ptrdiff_t>(g.pad);
          T* out = row + oy * g.out_w;
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.height)) {
            std::fill_n(out, g.out_w, T(0));
            continue;
          }
          const T* src = image + (c * g.height + static_cast<std::size_t>(iy)) * g.width;
          for (std::size_t ox = 0; ox < g.out_w; ++ox) {
            const auto ix = static_cast<std::ptrdiff_t>(ox * g.stride + kj) - static_cast<std::ptrdiff_t>(g.pad);
            out[ox] = (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.width)) ? T(0) : src[ix];
          }
        }
      }
    }
  }
}

// Accumulates columns back into the image (adjoint of im2col).
template <typename T>
void col2im(const T* col, const ConvGeometry& g, T* image) {
  for (std::size_t c = 0; c < g.channels; ++c) {
    for (std::size_t ki = 0; ki < g.kh; ++ki) {
      for (std::size_t kj = 0; kj < g.kw; ++kj) {
        const T* row = col + ((c * g.kh + ki) * g.kw + kj) * g.col_cols();
        for (std::size_t oy = 0; oy < g.out_h; ++oy) {
          const auto iy = static_cast<std::ptrdiff_t>(oy * g.stride + ki) - static_cast<std::ptrdiff_t>(g.pad);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.height)) continue;
          T* dst = image + (c * g.height + static_cast<std::size_t>(iy)) * g.width;
          const T* in = row + oy * g.out_w;
          for (std::size_t ox = 0; ox < g.out_w; ++ox) {
            const auto ix = static_cast<std::ptrdiff_t>(ox * g.stride + kj) - static_cast<std::ptrdiff_t>(g.pad);
            if (ix >= 0 && ix < static_cast<std::ptrdiff_t>(g.width)) dst[ix] += in[ox];
          }
        }
      }
    }
  }
}

template <typename T>
void require_conv_args(const BasicTensor<T>& input, const BasicTensor<T>& kernel, std::size_t stride,
                       const char* op) {
  if (input.rank() != 4 || kernel.rank() != 4) {
    throw ShapeError(std::string(op) + " expects 4-D input and kernel, got " + to_string(input.shape()) +
                     " and " + to_string(kernel.shape()));
  }
  if (stride == 0) throw ShapeError(std::string(op) + ": stride must be positive");
}

// Sums per-item kernel gradients in item order so the result is independent
// of how items were spread over threads.
template <typename T>
void reduce_kernel_grads(const std::vector<std::vector<T>>& parts, std::span<T> dst) {
  for (const auto& part : parts) {
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += part[i];
  }
}

}  // namespace detail

/// Cross-correlation of input [B,Cin,H,W] with kernel [Cout,Cin,kh,kw].
template <typename T>
BasicTensor<T> conv2d(const BasicTensor<T>& input, const BasicTensor<T>& kernel, std::size_t stride,
                      std::size_t padding) {
  detail::require_conv_args(input, kernel, stride, "conv2d");
  const auto& is = input.shape();
  const auto& ks = kernel.shape();
  if (is[1] != ks[1]) {
    throw ShapeError("conv2d: input has " + std::to_string(is[1]) + " channels but kernel expects " +
                     std::to_string(ks[1]) + " (input " + to_string(is) + ", kernel " + to_string(ks) + ")");
  }
  if (ks[2] > is[2] + 2 * padding || ks[3] > is[3] + 2 * padding) {
    throw ShapeError("conv2d: kernel " + to_string(ks) + " larger than padded input " + to_string(is));
  }
  const detail::ConvGeometry g{is[1], is[2], is[3], ks[2], ks[3], stride, padding,
                               conv_out_extent(is[2], ks[2], stride, padding),
                               conv_out_extent(is[3], ks[3], stride, padding)};
  const std::size_t batch = is[0], cout = ks[0];
  const std::size_t out_item = cout * g.col_cols();
  std::vector<T> y(batch * out_item);
  {
    const auto* x = input.values().data();
    detail::ConstMatMap<T> w(kernel.values().data(), cout, g.col_rows());
    parallel_for(batch, [&](std::size_t b) {
      std::vector<T> col(g.col_rows() * g.col_cols());
      detail::im2col(x + b * g.image_size(), g, col.data());
      detail::MatMap<T> out(y.data() + b * out_item, cout, g.col_cols());
      out.noalias() = w * detail::ConstMatMap<T>(col.data(), g.col_rows(), g.col_cols());
    });
  }
  return BasicTensor<T>::make_result(
      "conv2d", Shape{batch, cout, g.out_h, g.out_w}, std::move(y), {input, kernel},
      [g, batch, cout, out_item](detail::Node<T>& self) {
        auto& in = *self.inputs[0];
        auto& kn = *self.inputs[1];
        detail::ConstMatMap<T> w(kn.value->data(), cout, g.col_rows());
        if (in.requires_grad) {
          auto dx = in.grad_buffer();
          parallel_for(batch, [&](std::size_t b) {
            std::vector<T> col(g.col_rows() * g.col_cols());
            detail::MatMap<T> dcol(col.data(), g.col_rows(), g.col_cols());
            dcol.noalias() = w.transpose() * detail::ConstMatMap<T>(self.grad.data() + b * out_item, cout, g.col_cols());
            detail::col2im(col.data(), g, dx.data() + b * g.image_size());
          });
        }
        if (kn.requires_grad) {
          std::vector<std::vector<T>> parts(batch);
          parallel_for(batch, [&](std::size_t b) {
            std::vector<T> col(g.col_rows() * g.col_cols());
            detail::im2col(in.value->data() + b * g.image_size(), g, col.data());
            parts[b].resize(cout * g.col_rows());
            detail::MatMap<T> dw(parts[b].data(), cout, g.col_rows());
            dw.noalias() = detail::ConstMatMap<T>(self.grad.data() + b * out_item, cout, g.col_cols()) *
                           detail::ConstMatMap<T>(col.data(), g.col_rows(), g.col_cols()).transpose();
          });
          detail::reduce_kernel_grads<T>(parts, kn.grad_buffer());
        }
      });
}

/// Transposed convolution of input [B,Cin,H,W] with kernel [Cin,Cout,kh,kw];
/// output extent (H - 1) stride - 2 padding + kh.
template <typename T>
BasicTensor<T> conv2d_transpose(const BasicTensor<T>& input, const BasicTensor<T>& kernel, std::size_t stride,
                                std::size_t padding) {
  detail::require_conv_args(input, kernel, stride, "conv2d_transpose");
  const auto& is = input.shape();
  const auto& ks = kernel.shape();
  if (is[1] != ks[0]) {
    throw ShapeError("conv2d_transpose: input has " + std::to_string(is[1]) + " channels but kernel expects " +
                     std::to_string(ks[0]) + " (input " + to_string(is) + ", kernel " + to_string(ks) + ")");
  }
  if ((is[2] - 1) * stride + ks[2] <= 2 * padding || (is[3] - 1) * stride + ks[3] <= 2 * padding) {
    throw ShapeError("conv2d_transpose: padding " + std::to_string(padding) + " leaves no output for input " +
                     to_string(is) + " and kernel " + to_string(ks));
  }
  const std::size_t out_h = conv_transpose_out_extent(is[2], ks[2], stride, padding);
  const std::size_t out_w = conv_transpose_out_extent(is[3], ks[3], stride, padding);
  // The output plays the role of the conv input; our input is the conv output.
  const detail::ConvGeometry g{ks[1], out_h, out_w, ks[2], ks[3], stride, padding, is[2], is[3]};
  const std::size_t batch = is[0], cin = ks[0];
  const std::size_t in_item = cin * g.col_cols();
  std::vector<T> y(batch * g.image_size(), T(0));
  {
    const auto* x = input.values().data();
    detail::ConstMatMap<T> w(kernel.values().data(), cin, g.col_rows());
    parallel_for(batch, [&](std::size_t b) {
      std::vector<T> col(g.col_rows() * g.col_cols());
      detail::MatMap<T> dcol(col.data(), g.col_rows(), g.col_cols());
      dcol.noalias() = w.transpose() * detail::ConstMatMap<T>(x + b * in_item, cin, g.col_cols());
      detail::col2im(col.data(), g, y.data() + b * g.image_size());
    });
  }
  return BasicTensor<T>::make_result(
      "conv2d_transpose", Shape{batch, g.channels, out_h, out_w}, std::move(y), {input, kernel},
      [g, batch, cin, in_item](detail::Node<T>& self) {
        auto& in = *self.inputs[0];
        auto& kn = *self.inputs[1];
        detail::ConstMatMap<T> w(kn.value->data(), cin, g.col_rows());
        const bool need_x = in.requires_grad;
        const bool need_k = kn.requires_grad;
        std::vector<std::vector<T>> parts(need_k ? batch : 0);
        std::span<T> dx = need_x ? in.grad_buffer() : std::span<T>{};
        parallel_for(batch, [&](std::size_t b) {
          std::vector<T> col(g.col_rows() * g.col_cols());
          detail::im2col(self.grad.data() + b * g.image_size(), g, col.data());
          detail::ConstMatMap<T> gcol(col.data(), g.col_rows(), g.col_cols());
          if (need_x) {
            std::vector<T> tmp(in_item);
            detail::MatMap<T>(tmp.data(), cin, g.col_cols()).noalias() = w * gcol;
            T* d = dx.data() + b * in_item;
            for (std::size_t i = 0; i < in_item; ++i) d[i] += tmp[i];
          }
          if (need_k) {
            parts[b].resize(cin * g.col_rows());
            detail::MatMap<T>(parts[b].data(), cin, g.col_rows()).noalias() =
                detail::ConstMatMap<T>(in.value->data() + b * in_item, cin, g.col_cols()) * gcol.transpose();
          }
        });
        if (need_k) detail::reduce_kernel_grads<T>(parts, kn.grad_buffer());
      });
}

}  // namespace inkgan
