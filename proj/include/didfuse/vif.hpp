#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "didfuse/image.hpp"

namespace didfuse {

inline constexpr int kVifScales = 4;
inline constexpr double kVifNoiseVariance = 2.0;
// Smallest square input for which every scale keeps a non-empty valid region.
inline constexpr int kVifMinSide = 41;

namespace detail {

// Normalized N x N Gaussian, tiny tails zeroed like MATLAB's fspecial.
inline std::vector<double> gaussian_window_2d(int n, double sigma) {
  std::vector<double> win(static_cast<std::size_t>(n) * n);
  const double c = (n - 1) / 2.0;
  double mx = 0.0;
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      const double dy = y - c, dx = x - c;
      win[y * n + x] = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
      mx = std::max(mx, win[y * n + x]);
    }
  }
  double sum = 0.0;
  for (double& v : win) {
    if (v < std::numeric_limits<double>::epsilon() * mx) v = 0.0;
    sum += v;
  }
  for (double& v : win) v /= sum;
  return win;
}

// 'valid' 2-D correlation.
inline Plane<double> filter2_valid(const std::vector<double>& win, int n, const Plane<double>& img) {
  const int oh = img.height - n + 1, ow = img.width - n + 1;
  Plane<double> out(std::max(oh, 0), std::max(ow, 0));
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int dy = 0; dy < n; ++dy) {
        const double* row = img.data.data() + static_cast<std::size_t>(y + dy) * img.width + x;
        const double* wr = win.data() + static_cast<std::size_t>(dy) * n;
        for (int dx = 0; dx < n; ++dx) s += wr[dx] * row[dx];
      }
      out.at(y, x) = s;
    }
  }
  return out;
}

inline Plane<double> decimate2(const Plane<double>& img) {
  Plane<double> out((img.height + 1) / 2, (img.width + 1) / 2);
  for (int y = 0; y < out.height; ++y) {
    for (int x = 0; x < out.width; ++x) out.at(y, x) = img.at(2 * y, 2 * x);
  }
  return out;
}

inline Plane<double> multiply(const Plane<double>& a, const Plane<double>& b) {
  Plane<double> out(a.height, a.width);
  for (std::size_t i = 0; i < a.size(); ++i) out.data[i] = a.data[i] * b.data[i];
  return out;
}

}  // namespace detail

// Pixel-domain multi-scale VIF of `dist` against reference `ref`, both on the
// 0..255 scale. Returns 1 when the reference carries no local variance at any
// scale (nothing to lose).
inline double vif(const Plane<double>& ref_in, const Plane<double>& dist_in) {
  if (ref_in.height != dist_in.height || ref_in.width != dist_in.width) {
    throw ShapeError("vif: size mismatch " + size_string(ref_in.height, ref_in.width) + " vs " +
                     size_string(dist_in.height, dist_in.width));
  }
  if (ref_in.height < kVifMinSide || ref_in.width < kVifMinSide) {
    throw ShapeError("vif: image " + size_string(ref_in.height, ref_in.width) + " is below the minimum size " +
                     size_string(kVifMinSide, kVifMinSide));
  }
  Plane<double> ref = ref_in;
  Plane<double> dist = dist_in;
  double num = 0.0, den = 0.0;
  for (int scale = 1; scale <= kVifScales; ++scale) {
    const int n = (1 << (kVifScales - scale + 1)) + 1;
    const auto win = detail::gaussian_window_2d(n, n / 5.0);
    if (scale > 1) {
      ref = detail::decimate2(detail::filter2_valid(win, n, ref));
      dist = detail::decimate2(detail::filter2_valid(win, n, dist));
    }
    const auto mu1 = detail::filter2_valid(win, n, ref);
    const auto mu2 = detail::filter2_valid(win, n, dist);
    const auto e11 = detail::filter2_valid(win, n, detail::multiply(ref, ref));
    const auto e22 = detail::filter2_valid(win, n, detail::multiply(dist, dist));
    const auto e12 = detail::filter2_valid(win, n, detail::multiply(ref, dist));
    for (std::size_t i = 0; i < mu1.size(); ++i) {
      double s1 = std::max(0.0, e11.data[i] - mu1.data[i] * mu1.data[i]);
      const double s2 = std::max(0.0, e22.data[i] - mu2.data[i] * mu2.data[i]);
      const double s12 = e12.data[i] - mu1.data[i] * mu2.data[i];
      double g = s12 / (s1 + 1e-10);
      double sv = s2 - g * s12;
      if (s1 < 1e-10) {
        g = 0.0;
        sv = s2;
        s1 = 0.0;
      }
      if (s2 < 1e-10) {
        g = 0.0;
        sv = 0.0;
      }
      if (g < 0) {
        sv = s2;
        g = 0.0;
      }
      if (sv <= 1e-10) sv = 1e-10;
      num += std::log10(1.0 + g * g * s1 / (sv + kVifNoiseVariance));
      den += std::log10(1.0 + s1 / kVifNoiseVariance);
    }
  }
  return den > 0 ? num / den : 1.0;
}

// Fusion VIF: mean of each source scored as reference against the fused image.
inline double vif_fusion(const Plane<double>& ir, const Plane<double>& vis, const Plane<double>& fused) {
  return 0.5 * (vif(ir, fused) + vif(vis, fused));
}

}  // namespace didfuse
