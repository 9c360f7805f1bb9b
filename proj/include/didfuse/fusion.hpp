#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <variant>
#include <vector>

#include "didfuse/net.hpp"
#include "didfuse/tensor.hpp"

namespace didfuse {

struct Summation {};

// gamma1/gamma2 weight background maps (and the skip maps), gamma3/gamma4
// weight detail maps. Each pair sums to one.
struct WeightedAverage {
  double gamma1 = 0.5;
  double gamma2 = 0.5;
  double gamma3 = 0.5;
  double gamma4 = 0.5;

  void validate() const {
    if (std::abs(gamma1 + gamma2 - 1.0) > 1e-12 || std::abs(gamma3 + gamma4 - 1.0) > 1e-12) {
      throw ConfigError("WeightedAverage: gamma1+gamma2 and gamma3+gamma4 must both equal 1");
    }
  }
};

struct L1Norm {};

using FusionStrategy = std::variant<Summation, WeightedAverage, L1Norm>;

// Which pair of weights a WeightedAverage applies.
enum class MapRole { Background, Detail, Skip };

inline std::string strategy_name(const FusionStrategy& s) {
  if (std::holds_alternative<Summation>(s)) return "sum";
  if (std::holds_alternative<WeightedAverage>(s)) return "avg";
  return "l1";
}

inline FusionStrategy parse_strategy(const std::string& name) {
  if (name == "sum") return Summation{};
  if (name == "avg") return WeightedAverage{};
  if (name == "l1") return L1Norm{};
  throw ConfigError("unknown fusion strategy '" + name + "' (expected sum, avg or l1)");
}

// 3x3 mean with replicate-edge padding over one h x w plane.
inline std::vector<double> box_blur3(const std::vector<double>& src, int h, int w) {
  std::vector<double> out(src.size());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      for (int dy = -1; dy <= 1; ++dy) {
        const int yy = std::clamp(y + dy, 0, h - 1);
        for (int dx = -1; dx <= 1; ++dx) s += src[yy * w + std::clamp(x + dx, 0, w - 1)];
      }
      out[y * w + x] = s / 9.0;
    }
  }
  return out;
}

struct L1Weights {
  std::vector<double> first;
  std::vector<double> second;
};

// Per-position weights of the two inputs under the L1-norm strategy.
// Positions where both blurred activities vanish get 0.5 each.
template <typename Real>
L1Weights l1_norm_weights(const Tensor4<Real>& a, const Tensor4<Real>& b, int batch) {
  const int h = a.h(), w = a.w();
  const std::size_t plane = a.shape().plane();
  std::vector<double> act_a(plane, 0.0), act_b(plane, 0.0);
  for (int c = 0; c < a.c(); ++c) {
    auto pa = a.plane(batch, c);
    auto pb = b.plane(batch, c);
    for (std::size_t i = 0; i < plane; ++i) {
      act_a[i] += std::abs(static_cast<double>(pa[i]));
      act_b[i] += std::abs(static_cast<double>(pb[i]));
    }
  }
  act_a = box_blur3(act_a, h, w);
  act_b = box_blur3(act_b, h, w);
  L1Weights eta{std::vector<double>(plane, 0.5), std::vector<double>(plane, 0.5)};
  for (std::size_t i = 0; i < plane; ++i) {
    const double s = act_a[i] + act_b[i];
    if (s > 0) {
      eta.first[i] = act_a[i] / s;
      eta.second[i] = act_b[i] / s;
    }
  }
  return eta;
}

template <typename Real>
Tensor4<Real> fuse_maps(const Tensor4<Real>& ir_map, const Tensor4<Real>& vis_map, const FusionStrategy& strategy,
                        MapRole role = MapRole::Background) {
  require_same_shape(ir_map.shape(), vis_map.shape(), "fuse_maps");
  Tensor4<Real> out(ir_map.shape());
  if (std::holds_alternative<Summation>(strategy)) {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = ir_map[i] + vis_map[i];
  } else if (const auto* wa = std::get_if<WeightedAverage>(&strategy)) {
    wa->validate();
    const double g1 = role == MapRole::Detail ? wa->gamma3 : wa->gamma1;
    const double g2 = role == MapRole::Detail ? wa->gamma4 : wa->gamma2;
    for (std::size_t i = 0; i < out.size(); ++i) {
      out[i] = static_cast<Real>(g1 * ir_map[i] + g2 * vis_map[i]);
    }
  } else {
    for (int b = 0; b < ir_map.n(); ++b) {
      const auto eta = l1_norm_weights(ir_map, vis_map, b);
      for (int c = 0; c < ir_map.c(); ++c) {
        auto pa = ir_map.plane(b, c);
        auto pb = vis_map.plane(b, c);
        auto po = out.plane(b, c);
        for (std::size_t i = 0; i < po.size(); ++i) {
          po[i] = static_cast<Real>(eta.first[i] * pa[i] + eta.second[i] * pb[i]);
        }
      }
    }
  }
  return out;
}

// Decomposes both sources, fuses background, detail and both skip maps with
// the same strategy, and decodes the result. Eval mode, batch 1.
template <typename Real>
Tensor4<Real> fuse_images(const Tensor4<Real>& ir, const Tensor4<Real>& vis, const ModelParams<Real>& params,
                          const FusionStrategy& strategy) {
  if (ir.shape() != vis.shape()) {
    throw ShapeError("fuse_images: source sizes differ: infrared " + std::to_string(ir.h()) + "x" +
                     std::to_string(ir.w()) + ", visible " + std::to_string(vis.h()) + "x" + std::to_string(vis.w()));
  }
  if (ir.n() != 1) throw ShapeError("fuse_images: expected batch size 1, got " + to_string(ir.shape()));
  const auto mi = decompose(ir, params, Mode::Eval);
  const auto mv = decompose(vis, params, Mode::Eval);
  return reconstruct(fuse_maps(mi.background, mv.background, strategy, MapRole::Background),
                     fuse_maps(mi.detail, mv.detail, strategy, MapRole::Detail),
                     fuse_maps(mi.skip1, mv.skip1, strategy, MapRole::Skip),
                     fuse_maps(mi.skip2, mv.skip2, strategy, MapRole::Skip), params, Mode::Eval);
}

}  // namespace didfuse
