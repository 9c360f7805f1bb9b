#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <variant>
#include <vector>

#include "didfuse/error.hpp"
#include "didfuse/image.hpp"

namespace didfuse {

// Classical two-scale split. The detail layer is kept in double so that
// double(background) + detail reproduces the input exactly.
struct ClassicalDecomposition {
  Plane<float> background;
  Plane<double> detail;
  double lambda = 0.0;

  [[nodiscard]] Plane<float> reconstruct() const {
    Plane<float> out(background.height, background.width);
    for (std::size_t i = 0; i < out.size(); ++i) {
      out.data[i] = static_cast<float>(static_cast<double>(background.data[i]) + detail.data[i]);
    }
    return out;
  }
};

namespace detail {

// y = (I + lambda (Gx^T Gx + Gy^T Gy)) x, forward differences on the valid region.
inline void smoothing_operator(const std::vector<double>& x, std::vector<double>& y, int h, int w, double lambda) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i];
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c + 1 < w; ++c) {
      const std::size_t i = static_cast<std::size_t>(r) * w + c;
      const double d = lambda * (x[i + 1] - x[i]);
      y[i + 1] += d;
      y[i] -= d;
    }
  }
  for (int r = 0; r + 1 < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const std::size_t i = static_cast<std::size_t>(r) * w + c;
      const std::size_t j = i + static_cast<std::size_t>(w);
      const double d = lambda * (x[j] - x[i]);
      y[j] += d;
      y[i] -= d;
    }
  }
}

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// Splits `img` given a smoothed background (double). Pixels whose residual
// would not be exact in double fall back to background 0, detail = input.
inline ClassicalDecomposition split_exact(const Plane<float>& img, const std::vector<double>& bg, double lambda) {
  ClassicalDecomposition out{Plane<float>(img.height, img.width), Plane<double>(img.height, img.width), lambda};
  for (std::size_t i = 0; i < img.size(); ++i) {
    const float b = static_cast<float>(bg[i]);
    const double d = static_cast<double>(img.data[i]) - static_cast<double>(b);
    if (static_cast<double>(b) + d == static_cast<double>(img.data[i])) {
      out.background.data[i] = b;
      out.detail.data[i] = d;
    } else {
      out.background.data[i] = 0.0f;
      out.detail.data[i] = img.data[i];
    }
  }
  return out;
}

}  // namespace detail

inline constexpr double kBaselineTolerance = 1e-8;

// Minimizer of |I - B|^2 + lambda (|gx * B|^2 + |gy * B|^2) by conjugate
// gradient, stopping at relative residual kBaselineTolerance.
inline std::vector<double> solve_background(const Plane<float>& img, double lambda) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    throw NumericError("background_optimize: lambda must be finite and >= 0, got " + std::to_string(lambda));
  }
  const int h = img.height, w = img.width;
  std::vector<double> b(img.data.begin(), img.data.end());
  for (double v : b) {
    if (!std::isfinite(v)) throw NumericError("background_optimize: non-finite input pixel");
  }
  if (lambda == 0.0) return b;

  std::vector<double> x = b, r(b.size()), p(b.size()), ap(b.size());
  detail::smoothing_operator(x, ap, h, w, lambda);
  for (std::size_t i = 0; i < r.size(); ++i) r[i] = b[i] - ap[i];
  p = r;
  const double bnorm = std::sqrt(detail::dot(b, b));
  const double target = kBaselineTolerance * std::max(bnorm, 1e-300);
  double rr = detail::dot(r, r);
  const std::size_t cap = 10 * b.size() + 100;
  for (std::size_t it = 0; it < cap; ++it) {
    if (std::sqrt(rr) <= target || bnorm == 0.0) return x;
    detail::smoothing_operator(p, ap, h, w, lambda);
    const double alpha = rr / detail::dot(p, ap);
    for (std::size_t i = 0; i < x.size(); ++i) {
      x[i] += alpha * p[i];
      r[i] -= alpha * ap[i];
    }
    const double rr_next = detail::dot(r, r);
    const double beta = rr_next / rr;
    rr = rr_next;
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = r[i] + beta * p[i];
  }
  if (std::sqrt(rr) <= target) return x;
  throw NumericError("background_optimize: conjugate gradient did not converge, relative residual " +
                     std::to_string(std::sqrt(rr) / std::max(bnorm, 1e-300)));
}

inline Plane<float> background_optimize(const Plane<float>& img, double lambda) {
  const auto x = solve_background(img, lambda);
  Plane<float> out(img.height, img.width);
  for (std::size_t i = 0; i < x.size(); ++i) out.data[i] = static_cast<float>(x[i]);
  return out;
}

inline std::vector<double> box_mean(const Plane<float>& img, int radius) {
  if (radius < 1) throw ShapeError("background_boxfilter: radius must be >= 1, got " + std::to_string(radius));
  const int h = img.height, w = img.width;
  const double count = static_cast<double>(2 * radius + 1) * (2 * radius + 1);
  std::vector<double> out(img.size());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      for (int dy = -radius; dy <= radius; ++dy) {
        const int yy = std::clamp(y + dy, 0, h - 1);
        for (int dx = -radius; dx <= radius; ++dx) s += img.at(yy, std::clamp(x + dx, 0, w - 1));
      }
      out[static_cast<std::size_t>(y) * w + x] = s / count;
    }
  }
  return out;
}

// (2r+1)^2 mean filter with replicate edges.
inline Plane<float> background_boxfilter(const Plane<float>& img, int radius) {
  const auto m = box_mean(img, radius);
  Plane<float> out(img.height, img.width);
  for (std::size_t i = 0; i < m.size(); ++i) out.data[i] = static_cast<float>(m[i]);
  return out;
}

struct Optimize {
  double lambda = 5.0;
};
struct Box {
  int radius = 15;
};
using ClassicalMethod = std::variant<Optimize, Box>;

inline ClassicalDecomposition classical_decompose(const Plane<float>& img, const ClassicalMethod& method) {
  if (const auto* o = std::get_if<Optimize>(&method)) {
    return detail::split_exact(img, solve_background(img, o->lambda), o->lambda);
  }
  return detail::split_exact(img, box_mean(img, std::get<Box>(method).radius), 0.0);
}

// Max-absolute selection; ties keep the first input.
inline double select_max_abs(double a, double b) { return std::abs(a) >= std::abs(b) ? a : b; }

// Averaged backgrounds plus max-abs details, clamped to [lo, hi].
inline Plane<float> classical_fuse(const Plane<float>& ir, const Plane<float>& vis, const ClassicalMethod& method,
                                   double lo = 0.0, double hi = 1.0) {
  if (ir.height != vis.height || ir.width != vis.width) {
    throw ShapeError("classical_fuse: infrared " + size_string(ir.height, ir.width) + " and visible " +
                     size_string(vis.height, vis.width) + " sizes differ");
  }
  const auto a = classical_decompose(ir, method);
  const auto b = classical_decompose(vis, method);
  Plane<float> out(ir.height, ir.width);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double bg = 0.5 * (static_cast<double>(a.background.data[i]) + b.background.data[i]);
    const double v = bg + select_max_abs(a.detail.data[i], b.detail.data[i]);
    out.data[i] = static_cast<float>(std::clamp(v, lo, hi));
  }
  return out;
}

}  // namespace didfuse
