#pragma once

// Deterministic infrared/visible-like image pairs for tests.

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "didfuse/image.hpp"
#include "didfuse/trainer.hpp"

namespace dftest {
using namespace didfuse;

inline double unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

struct SyntheticPlanes {
  Plane<double> ir;   // [0,1]
  Plane<double> vis;  // [0,1]
};

// Shared smooth scene; the infrared image adds a few hot compact targets, the
// visible one adds fine oriented texture.
inline SyntheticPlanes synthetic_planes(int h, int w, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const double gx = unit(rng) - 0.5, gy = unit(rng) - 0.5;
  struct Blob { double y, x, r, a; };
  std::vector<Blob> scene, hot;
  for (int i = 0; i < 3; ++i) scene.push_back({unit(rng) * h, unit(rng) * w, 0.15 * h + 0.2 * h * unit(rng), unit(rng) - 0.3});
  for (int i = 0; i < 2; ++i) hot.push_back({unit(rng) * h, unit(rng) * w, 2.0 + 3.0 * unit(rng), 0.5 + 0.3 * unit(rng)});
  const double freq = 0.6 + 0.8 * unit(rng), angle = 3.14159 * unit(rng), phase = 6.28 * unit(rng);
  const double cy = std::sin(angle), cx = std::cos(angle);

  SyntheticPlanes out{Plane<double>(h, w), Plane<double>(h, w)};
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double base = 0.45 + 0.3 * (gx * x / w + gy * y / h);
      for (const auto& b : scene) {
        const double d2 = (y - b.y) * (y - b.y) + (x - b.x) * (x - b.x);
        base += 0.35 * b.a * std::exp(-d2 / (2 * b.r * b.r));
      }
      double ir = 0.2 + 0.5 * base;
      for (const auto& b : hot) {
        const double d2 = (y - b.y) * (y - b.y) + (x - b.x) * (x - b.x);
        ir += b.a * std::exp(-d2 / (2 * b.r * b.r));
      }
      const double tex = 0.12 * std::sin(freq * (cx * x + cy * y) + phase) + 0.05 * (unit(rng) - 0.5);
      out.ir.at(y, x) = std::clamp(ir, 0.0, 1.0);
      out.vis.at(y, x) = std::clamp(0.1 + 0.8 * base + tex, 0.0, 1.0);
    }
  }
  return out;
}

// 8-bit version, as it would be stored on disk.
inline std::pair<GrayImage, GrayImage> synthetic_gray_pair(int h, int w, std::uint64_t seed) {
  auto p = synthetic_planes(h, w, seed);
  for (auto& v : p.ir.data) v *= 255.0;
  for (auto& v : p.vis.data) v *= 255.0;
  return {to_gray(p.ir), to_gray(p.vis)};
}

// Training pairs built from the 8-bit images, scaled to [0,1].
template <typename Real = float>
std::vector<ImagePair<Real>> synthetic_dataset(int count, int h, int w, std::uint64_t seed) {
  std::vector<ImagePair<Real>> out;
  for (int i = 0; i < count; ++i) {
    auto [ir, vis] = synthetic_gray_pair(h, w, seed + static_cast<std::uint64_t>(i) * 7919u);
    out.push_back({"pair" + std::to_string(i), to_tensor<Real>(ir), to_tensor<Real>(vis)});
  }
  return out;
}

}  // namespace dftest
