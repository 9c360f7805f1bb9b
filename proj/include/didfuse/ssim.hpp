#pragma once

#include <cmath>
#include <vector>

#include "didfuse/tensor.hpp"

namespace didfuse {

inline constexpr int kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;
inline constexpr double kSsimK1 = 0.01;
inline constexpr double kSsimK2 = 0.03;

// Normalized 1-D Gaussian taps; the 2-D window is their outer product.
inline std::vector<double> gaussian_taps(int size, double sigma) {
  std::vector<double> taps(size);
  const double centre = (size - 1) / 2.0;
  double sum = 0.0;
  for (int i = 0; i < size; ++i) {
    const double d = i - centre;
    taps[i] = std::exp(-d * d / (2.0 * sigma * sigma));
    sum += taps[i];
  }
  for (double& t : taps) t /= sum;
  return taps;
}

namespace detail {

// Valid-region separable correlation of an h x w plane.
inline std::vector<double> filter_valid(const std::vector<double>& src, int h, int w, const std::vector<double>& taps) {
  const int k = static_cast<int>(taps.size());
  const int oh = h - k + 1, ow = w - k + 1;
  std::vector<double> tmp(static_cast<std::size_t>(h) * ow, 0.0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int t = 0; t < k; ++t) s += taps[t] * src[y * w + x + t];
      tmp[y * ow + x] = s;
    }
  }
  std::vector<double> out(static_cast<std::size_t>(oh) * ow, 0.0);
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int t = 0; t < k; ++t) s += taps[t] * tmp[(y + t) * ow + x];
      out[y * ow + x] = s;
    }
  }
  return out;
}

// Adjoint of filter_valid: spreads an (h-k+1) x (w-k+1) map back onto h x w.
inline std::vector<double> filter_valid_adjoint(const std::vector<double>& src, int h, int w,
                                                const std::vector<double>& taps) {
  const int k = static_cast<int>(taps.size());
  const int oh = h - k + 1, ow = w - k + 1;
  std::vector<double> tmp(static_cast<std::size_t>(h) * ow, 0.0);
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      const double v = src[y * ow + x];
      for (int t = 0; t < k; ++t) tmp[(y + t) * ow + x] += taps[t] * v;
    }
  }
  std::vector<double> out(static_cast<std::size_t>(h) * w, 0.0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < ow; ++x) {
      const double v = tmp[y * ow + x];
      for (int t = 0; t < k; ++t) out[y * w + x + t] += taps[t] * v;
    }
  }
  return out;
}

template <typename Real>
std::vector<double> plane_as_double(const Tensor4<Real>& t, int b) {
  auto p = t.plane(b, 0);
  return {p.begin(), p.end()};
}

}  // namespace detail

template <typename Real>
struct SsimResult {
  double value = 0.0;
  Tensor4<Real> grad;  // d(value)/d(second image); empty-shaped if not requested
};

// Mean SSIM over valid 11x11 Gaussian windows, averaged over the batch.
// Optionally returns the gradient with respect to `y`.
template <typename Real>
SsimResult<Real> ssim_eval(const Tensor4<Real>& x, const Tensor4<Real>& y, double data_range, bool want_grad) {
  require_same_shape(x.shape(), y.shape(), "ssim");
  if (x.c() != 1) throw ShapeError("ssim: expected single-channel images, got " + to_string(x.shape()));
  if (x.h() < kSsimWindow || x.w() < kSsimWindow) {
    throw ShapeError("ssim: images smaller than the 11x11 window: " + to_string(x.shape()));
  }
  if (!(data_range > 0)) throw ConfigError("ssim: data_range must be positive");

  const double c1 = (kSsimK1 * data_range) * (kSsimK1 * data_range);
  const double c2 = (kSsimK2 * data_range) * (kSsimK2 * data_range);
  const auto taps = gaussian_taps(kSsimWindow, kSsimSigma);
  const int h = x.h(), w = x.w();
  const int oh = h - kSsimWindow + 1, ow = w - kSsimWindow + 1;
  const double positions = static_cast<double>(oh) * ow * x.n();

  SsimResult<Real> res;
  if (want_grad) res.grad = Tensor4<Real>(y.shape());
  double total = 0.0;
  for (int b = 0; b < x.n(); ++b) {
    const auto xs = detail::plane_as_double(x, b);
    const auto ys = detail::plane_as_double(y, b);
    std::vector<double> xx(xs.size()), yy(xs.size()), xy(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) {
      xx[i] = xs[i] * xs[i];
      yy[i] = ys[i] * ys[i];
      xy[i] = xs[i] * ys[i];
    }
    const auto mx = detail::filter_valid(xs, h, w, taps);
    const auto my = detail::filter_valid(ys, h, w, taps);
    const auto exx = detail::filter_valid(xx, h, w, taps);
    const auto eyy = detail::filter_valid(yy, h, w, taps);
    const auto exy = detail::filter_valid(xy, h, w, taps);

    std::vector<double> da(mx.size()), db(mx.size()), dc(mx.size());
    for (std::size_t p = 0; p < mx.size(); ++p) {
      const double sxx = exx[p] - mx[p] * mx[p];
      const double syy = eyy[p] - my[p] * my[p];
      const double sxy = exy[p] - mx[p] * my[p];
      const double n1 = 2.0 * mx[p] * my[p] + c1;
      const double n2 = 2.0 * sxy + c2;
      const double d1 = mx[p] * mx[p] + my[p] * my[p] + c1;
      const double d2 = sxx + syy + c2;
      const double den = d1 * d2;
      const double s = n1 * n2 / den;
      total += s;
      if (want_grad) {
        const double ds_dmy = (2.0 * mx[p] * n2 - s * 2.0 * my[p] * d2) / den;
        const double ds_dsyy = -s * d1 / den;
        const double ds_dsxy = 2.0 * n1 / den;
        // syy = E[y^2] - my^2 and sxy = E[xy] - mx*my, so fold the my terms in.
        da[p] = ds_dmy - 2.0 * my[p] * ds_dsyy - mx[p] * ds_dsxy;
        db[p] = ds_dsyy;
        dc[p] = ds_dsxy;
      }
    }
    if (want_grad) {
      const auto ga = detail::filter_valid_adjoint(da, h, w, taps);
      const auto gb = detail::filter_valid_adjoint(db, h, w, taps);
      const auto gc = detail::filter_valid_adjoint(dc, h, w, taps);
      auto dst = res.grad.plane(b, 0);
      for (std::size_t i = 0; i < dst.size(); ++i) {
        dst[i] = static_cast<Real>((ga[i] + 2.0 * ys[i] * gb[i] + xs[i] * gc[i]) / positions);
      }
    }
  }
  res.value = total / positions;
  return res;
}

template <typename Real>
double ssim(const Tensor4<Real>& x, const Tensor4<Real>& y, double data_range = 1.0) {
  return ssim_eval(x, y, data_range, false).value;
}

}  // namespace didfuse
