#pragma once

#include <cblas.h>

#include <algorithm>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include "didfuse/tensor.hpp"

namespace didfuse {

namespace detail {

// Dense row-major matrix.
template <typename T>
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<T> values;

  Matrix() = default;
  Matrix(int r, int c) : rows(r), cols(c), values(static_cast<std::size_t>(r) * c, T(0)) {}
  void resize(int r, int c) {
    rows = r;
    cols = c;
    values.resize(static_cast<std::size_t>(r) * c);
  }
  T* data() { return values.data(); }
  [[nodiscard]] const T* data() const { return values.data(); }
};

// c = beta * c + op(a) * op(b), plain loops. Used for double, where some
// OpenBLAS builds (0.3.20, Cooperlake kernel) return wrong dgemm results.
template <typename T>
void gemm_loops(const Matrix<T>& a, bool trans_a, const Matrix<T>& b, bool trans_b, Matrix<T>& c, T beta, int m,
                int n, int k) {
  if (beta == T(0)) std::fill(c.values.begin(), c.values.end(), T(0));
  Matrix<T> bt;
  const Matrix<T>* bn = &b;
  if (trans_b) {
    bt.resize(k, n);
    for (int j = 0; j < n; ++j)
      for (int q = 0; q < k; ++q) bt.values[static_cast<std::size_t>(q) * n + j] = b.values[static_cast<std::size_t>(j) * b.cols + q];
    bn = &bt;
  }
  for (int i = 0; i < m; ++i) {
    T* ci = c.data() + static_cast<std::size_t>(i) * n;
    for (int q = 0; q < k; ++q) {
      const T av = trans_a ? a.values[static_cast<std::size_t>(q) * a.cols + i]
                           : a.values[static_cast<std::size_t>(i) * a.cols + q];
      const T* bq = bn->data() + static_cast<std::size_t>(q) * n;
      for (int j = 0; j < n; ++j) ci[j] += av * bq[j];
    }
  }
}

// c = beta * c + op(a) * op(b), in the matrices' own precision.
template <typename T>
void gemm(const Matrix<T>& a, bool trans_a, const Matrix<T>& b, bool trans_b, Matrix<T>& c, T beta) {
  const int m = trans_a ? a.cols : a.rows;
  const int k = trans_a ? a.rows : a.cols;
  const int n = trans_b ? b.rows : b.cols;
  if (beta == T(0)) c.resize(m, n);
  if constexpr (std::is_same_v<T, float>) {
    const auto ta = trans_a ? CblasTrans : CblasNoTrans;
    const auto tb = trans_b ? CblasTrans : CblasNoTrans;
    cblas_sgemm(CblasRowMajor, ta, tb, m, n, k, 1.0f, a.data(), a.cols, b.data(), b.cols, beta, c.data(), c.cols);
  } else {
    static_assert(std::is_same_v<T, double>, "gemm: float or double only");
    gemm_loops(a, trans_a, b, trans_b, c, beta, m, n, k);
  }
}

// Source index of padded coordinate i in [-1, len], or -1 for a zero pad.
// Reflection does not repeat the edge: -1 -> 1, len -> len - 2.
inline int pad_source(int i, int len, PaddingMode mode) {
  if (i >= 0 && i < len) return i;
  if (mode == PaddingMode::Zero) return -1;
  return i < 0 ? -i : 2 * len - 2 - i;
}

// Output rows are processed in blocks so the unfolded patch matrix stays
// bounded for large images.
inline int conv_block_rows(int k_rows, int w) {
  const int pixels = std::max(256, (1 << 22) / std::max(1, k_rows));
  return std::max(1, pixels / std::max(1, w));
}

// Unfolds 3x3 patches of one padded sample into a (inC*9) x (rows*w) matrix
// for output rows [y0, y0 + rows).
template <typename T>
void unfold_patches(const std::vector<T>& padded, int in_c, int h, int w, int y0, int rows, Matrix<T>& cols) {
  const int pw = w + 2;
  const std::size_t pplane = static_cast<std::size_t>(h + 2) * pw;
  const int count = rows * w;
  cols.resize(in_c * 9, count);
  for (int i = 0; i < in_c; ++i) {
    const T* src = padded.data() + i * pplane;
    for (int k = 0; k < 9; ++k) {
      const int dy = k / 3, dx = k % 3;
      T* row = cols.data() + (static_cast<std::size_t>(i) * 9 + k) * count;
      for (int y = 0; y < rows; ++y) {
        const T* s = src + static_cast<std::size_t>(y0 + y + dy) * pw + dx;
        std::copy(s, s + w, row + static_cast<std::size_t>(y) * w);
      }
    }
  }
}

// Inverse of unfold_patches: adds every column entry back onto its padded pixel.
template <typename T>
void fold_patches(const Matrix<T>& cols, int in_c, int h, int w, int y0, int rows, std::vector<T>& padded) {
  const int pw = w + 2;
  const std::size_t pplane = static_cast<std::size_t>(h + 2) * pw;
  const int count = rows * w;
  for (int i = 0; i < in_c; ++i) {
    T* dst = padded.data() + i * pplane;
    for (int k = 0; k < 9; ++k) {
      const int dy = k / 3, dx = k % 3;
      const T* row = cols.data() + (static_cast<std::size_t>(i) * 9 + k) * count;
      for (int y = 0; y < rows; ++y) {
        T* d = dst + static_cast<std::size_t>(y0 + y + dy) * pw + dx;
        const T* s = row + static_cast<std::size_t>(y) * w;
        for (int x = 0; x < w; ++x) d[x] += s[x];
      }
    }
  }
}

template <typename Real>
std::vector<Real> pad_sample(const Tensor4<Real>& in, int b, PaddingMode mode) {
  const int c = in.c(), h = in.h(), w = in.w();
  const int pw = w + 2;
  std::vector<Real> out(static_cast<std::size_t>(c) * (h + 2) * pw, Real(0));
  for (int i = 0; i < c; ++i) {
    Real* dst = out.data() + static_cast<std::size_t>(i) * (h + 2) * pw;
    const Real* src = in.plane(b, i).data();
    for (int py = 0; py < h + 2; ++py) {
      const int sy = pad_source(py - 1, h, mode);
      if (sy < 0) continue;
      Real* d = dst + static_cast<std::size_t>(py) * pw;
      const Real* s = src + static_cast<std::size_t>(sy) * w;
      std::copy(s, s + w, d + 1);
      if (mode == PaddingMode::Reflection) {
        d[0] = s[1];
        d[w + 1] = s[w - 2];
      }
    }
  }
  return out;
}

template <typename Real>
void check_conv_args(const Shape& in, const Tensor4<Real>& kernel, std::size_t bias_len, PaddingMode mode) {
  const Shape& k = kernel.shape();
  if (k.h != 3 || k.w != 3) {
    throw ShapeError("conv2d: kernel must be 3x3, got " + to_string(k));
  }
  if (k.c != in.c) {
    throw ShapeError("conv2d: kernel " + to_string(k) + " incompatible with input " + to_string(in));
  }
  if (bias_len != static_cast<std::size_t>(k.n)) {
    throw ShapeError("conv2d: bias length " + std::to_string(bias_len) + " != output channels " +
                     std::to_string(k.n));
  }
  if (mode == PaddingMode::Reflection && (in.h < 2 || in.w < 2)) {
    throw ShapeError("conv2d: reflection padding needs h,w >= 2, got " + to_string(in));
  }
}

template <typename Real>
Matrix<Real> kernel_matrix(const Tensor4<Real>& kernel) {
  Matrix<Real> m(kernel.n(), kernel.c() * 9);
  std::copy(kernel.data().begin(), kernel.data().end(), m.values.begin());
  return m;
}

}  // namespace detail

// Pads by one pixel on every side.
template <typename Real>
Tensor4<Real> pad1(const Tensor4<Real>& in, PaddingMode mode) {
  if (mode == PaddingMode::Reflection && (in.h() < 2 || in.w() < 2)) {
    throw ShapeError("pad1: reflection padding needs h,w >= 2, got " + to_string(in.shape()));
  }
  Tensor4<Real> out(Shape{in.n(), in.c(), in.h() + 2, in.w() + 2});
  for (int b = 0; b < in.n(); ++b) {
    const auto padded = detail::pad_sample(in, b, mode);
    std::copy(padded.begin(), padded.end(), out.data().begin() + static_cast<std::ptrdiff_t>(out.index(b, 0, 0, 0)));
  }
  return out;
}

// Same-size 3x3 convolution (cross-correlation), stride 1, pad 1.
template <typename Real>
Tensor4<Real> conv2d_forward(const Tensor4<Real>& input, const Tensor4<Real>& kernel, std::span<const Real> bias,
                             PaddingMode padding) {
  detail::check_conv_args(input.shape(), kernel, bias.size(), padding);
  require_finite(input, "conv2d_forward");

  const int in_c = input.c(), h = input.h(), w = input.w(), out_c = kernel.n();
  const int block = detail::conv_block_rows(in_c * 9, w);
  const auto weights = detail::kernel_matrix(kernel);

  Tensor4<Real> out(Shape{input.n(), out_c, h, w});
  detail::Matrix<Real> cols;
  detail::Matrix<Real> result;
  for (int b = 0; b < input.n(); ++b) {
    const auto padded = detail::pad_sample(input, b, padding);
    for (int y0 = 0; y0 < h; y0 += block) {
      const int rows = std::min(block, h - y0);
      const int count = rows * w;
      detail::unfold_patches(padded, in_c, h, w, y0, rows, cols);
      detail::gemm(weights, false, cols, false, result, Real(0));
      for (int o = 0; o < out_c; ++o) {
        Real* dst = out.plane(b, o).data() + static_cast<std::size_t>(y0) * w;
        const Real* src = result.data() + static_cast<std::size_t>(o) * count;
        const Real bo = bias[o];
        for (int p = 0; p < count; ++p) dst[p] = src[p] + bo;
      }
    }
  }
  return out;
}

template <typename Real>
struct ConvGradients {
  Tensor4<Real> input;
  Tensor4<Real> kernel;
  std::vector<Real> bias;
};

template <typename Real>
ConvGradients<Real> conv2d_backward(const Tensor4<Real>& grad_out, const Tensor4<Real>& saved_input,
                                    const Tensor4<Real>& kernel, PaddingMode padding) {
  detail::check_conv_args(saved_input.shape(), kernel, static_cast<std::size_t>(kernel.n()), padding);
  const Shape expected{saved_input.n(), kernel.n(), saved_input.h(), saved_input.w()};
  require_same_shape(grad_out.shape(), expected, "conv2d_backward grad_out");

  const int in_c = saved_input.c(), h = saved_input.h(), w = saved_input.w(), out_c = kernel.n();
  const int pw = w + 2;
  const std::size_t pplane = static_cast<std::size_t>(h + 2) * pw;
  const int block = detail::conv_block_rows(in_c * 9, w);
  const auto weights = detail::kernel_matrix(kernel);

  detail::Matrix<Real> grad_weights(out_c, in_c * 9);
  std::vector<double> grad_bias(out_c, 0.0);
  Tensor4<Real> grad_in(saved_input.shape());

  detail::Matrix<Real> cols;
  detail::Matrix<Real> g;
  detail::Matrix<Real> grad_cols;
  std::vector<Real> grad_padded(static_cast<std::size_t>(in_c) * pplane);

  for (int b = 0; b < saved_input.n(); ++b) {
    const auto padded = detail::pad_sample(saved_input, b, padding);
    std::fill(grad_padded.begin(), grad_padded.end(), Real(0));
    for (int y0 = 0; y0 < h; y0 += block) {
      const int rows = std::min(block, h - y0);
      const int count = rows * w;
      g.resize(out_c, count);
      for (int o = 0; o < out_c; ++o) {
        const Real* src = grad_out.plane(b, o).data() + static_cast<std::size_t>(y0) * w;
        std::copy(src, src + count, g.data() + static_cast<std::size_t>(o) * count);
        double sum = 0.0;
        for (int p = 0; p < count; ++p) sum += src[p];
        grad_bias[o] += sum;
      }
      detail::unfold_patches(padded, in_c, h, w, y0, rows, cols);
      detail::gemm(g, false, cols, true, grad_weights, Real(1));
      detail::gemm(weights, true, g, false, grad_cols, Real(0));
      detail::fold_patches(grad_cols, in_c, h, w, y0, rows, grad_padded);
    }
    // Fold the padded border back; reflected pads land on their source pixels.
    for (int i = 0; i < in_c; ++i) {
      const Real* src = grad_padded.data() + i * pplane;
      Real* dst = grad_in.plane(b, i).data();
      for (int y = 0; y < h; ++y) std::copy(src + (y + 1) * pw + 1, src + (y + 1) * pw + 1 + w, dst + y * w);
      if (padding == PaddingMode::Zero) continue;
      for (int py = 0; py < h + 2; ++py) {
        const int sy = detail::pad_source(py - 1, h, padding);
        const bool row_pad = py == 0 || py == h + 1;
        for (int px = 0; px < pw; ++px) {
          if (!row_pad && px != 0 && px != pw - 1) continue;
          dst[sy * w + detail::pad_source(px - 1, w, padding)] += src[py * pw + px];
        }
      }
    }
  }

  Tensor4<Real> grad_kernel(kernel.shape(), std::move(grad_weights.values));
  std::vector<Real> gb(grad_bias.begin(), grad_bias.end());
  return {std::move(grad_in), std::move(grad_kernel), std::move(gb)};
}

}  // namespace didfuse
