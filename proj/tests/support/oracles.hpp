#pragma once

// Straightforward reference implementations used as test oracles.

#include <algorithm>
#include <cmath>
#include <map>
#include <utility>
#include <vector>

#include "didfuse/image.hpp"
#include "didfuse/tensor.hpp"

namespace dftest {
using namespace didfuse;

// Padded value at (y, x) with coordinates in [-1, len].
template <typename Real>
double padded_at(const Tensor4<Real>& t, int b, int c, int y, int x, PaddingMode mode) {
  auto reflect = [](int i, int len) { return i < 0 ? -i : (i >= len ? 2 * len - 2 - i : i); };
  if (y < 0 || y >= t.h() || x < 0 || x >= t.w()) {
    if (mode == PaddingMode::Zero) return 0.0;
    y = reflect(y, t.h());
    x = reflect(x, t.w());
  }
  return t.at(b, c, y, x);
}

// Seven nested loops, accumulated in double.
template <typename Real>
Tensor4<double> conv_oracle(const Tensor4<Real>& in, const Tensor4<Real>& k, const std::vector<Real>& bias,
                            PaddingMode mode) {
  Tensor4<double> out(Shape{in.n(), k.n(), in.h(), in.w()});
  for (int b = 0; b < in.n(); ++b)
    for (int o = 0; o < k.n(); ++o)
      for (int y = 0; y < in.h(); ++y)
        for (int x = 0; x < in.w(); ++x) {
          double s = bias[o];
          for (int i = 0; i < in.c(); ++i)
            for (int dy = 0; dy < 3; ++dy)
              for (int dx = 0; dx < 3; ++dx) s += static_cast<double>(k.at(o, i, dy, dx)) * padded_at(in, b, i, y + dy - 1, x + dx - 1, mode);
          out.at(b, o, y, x) = s;
        }
  return out;
}

inline double entropy_oracle(const GrayImage& img) {
  std::map<int, int> counts;
  for (auto p : img.pixels) ++counts[p];
  double h = 0.0;
  for (auto [v, c] : counts) {
    const double p = static_cast<double>(c) / img.size();
    h += -p * std::log(p) / std::log(2.0);
  }
  return h;
}

// I(a; b) = H(a) + H(b) - H(a, b) with sparse histograms.
inline double mi_oracle(const GrayImage& a, const GrayImage& b) {
  std::map<std::pair<int, int>, int> joint;
  for (std::size_t i = 0; i < a.size(); ++i) ++joint[{a.pixels[i], b.pixels[i]}];
  double hj = 0.0;
  for (auto [k, c] : joint) {
    const double p = static_cast<double>(c) / a.size();
    hj -= p * std::log2(p);
  }
  return entropy_oracle(a) + entropy_oracle(b) - hj;
}

inline double sd_oracle(const Plane<double>& p) {
  double s = 0.0, s2 = 0.0;
  for (double v : p.data) s += v;
  const double mean = s / p.size();
  for (double v : p.data) s2 += (v - mean) * (v - mean);
  return std::sqrt(s2 / p.size());
}

inline double sf_oracle(const Plane<double>& p) {
  double rf = 0.0, cf = 0.0;
  int nr = 0, nc = 0;
  for (int y = 0; y < p.height; ++y)
    for (int x = 1; x < p.width; ++x, ++nr) rf += std::pow(p.at(y, x) - p.at(y, x - 1), 2);
  for (int y = 1; y < p.height; ++y)
    for (int x = 0; x < p.width; ++x, ++nc) cf += std::pow(p.at(y, x) - p.at(y - 1, x), 2);
  return std::hypot(std::sqrt(rf / nr), std::sqrt(cf / nc));
}

inline double ag_oracle(const Plane<double>& p) {
  double s = 0.0;
  int n = 0;
  for (int y = 0; y + 1 < p.height; ++y)
    for (int x = 0; x + 1 < p.width; ++x, ++n) {
      const double gx = p.at(y, x + 1) - p.at(y, x);
      const double gy = p.at(y + 1, x) - p.at(y, x);
      s += std::sqrt(0.5 * (gx * gx + gy * gy));
    }
  return s / n;
}

// Mean SSIM of two h x w planes: 11x11 Gaussian (sigma 1.5) applied directly
// in 2-D over every valid window.
inline double ssim_oracle(const std::vector<double>& x, const std::vector<double>& y, int h, int w,
                          double range = 1.0) {
  double win[11][11], total = 0.0;
  for (int i = 0; i < 11; ++i)
    for (int j = 0; j < 11; ++j) total += win[i][j] = std::exp(-((i - 5) * (i - 5) + (j - 5) * (j - 5)) / (2 * 1.5 * 1.5));
  for (auto& row : win)
    for (auto& v : row) v /= total;
  const double c1 = std::pow(0.01 * range, 2), c2 = std::pow(0.03 * range, 2);
  double acc = 0.0;
  int count = 0;
  for (int oy = 0; oy + 11 <= h; ++oy)
    for (int ox = 0; ox + 11 <= w; ++ox, ++count) {
      double mx = 0, my = 0, xx = 0, yy = 0, xy = 0;
      for (int i = 0; i < 11; ++i)
        for (int j = 0; j < 11; ++j) {
          const double a = x[(oy + i) * w + ox + j], b = y[(oy + i) * w + ox + j], g = win[i][j];
          mx += g * a;
          my += g * b;
          xx += g * a * a;
          yy += g * b * b;
          xy += g * a * b;
        }
      const double vx = xx - mx * mx, vy = yy - my * my, cov = xy - mx * my;
      acc += (2 * mx * my + c1) * (2 * cov + c2) / ((mx * mx + my * my + c1) * (vx + vy + c2));
    }
  return acc / count;
}

}  // namespace dftest
