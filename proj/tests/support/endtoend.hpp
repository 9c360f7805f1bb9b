#pragma once

// Full-objective gradient check through encoder and decoder.

#include <algorithm>
#include <map>
#include <string>
#include <vector>

#include "didfuse/trainer.hpp"
#include "support/gradcheck.hpp"

namespace dftest {
using namespace didfuse;

inline double network_loss(const ModelParams<double>& p, const Tensor4<double>& ir, const Tensor4<double>& vis,
                           const LossWeights& w) {
  const auto ei = decompose(ir, p, Mode::Train);
  const auto ev = decompose(vis, p, Mode::Train);
  return total_loss(ir, reconstruct(ei, p, Mode::Train), vis, reconstruct(ev, p, Mode::Train), ei, ev, w).total;
}

struct TensorError {
  std::string name;
  double e64 = 0.0;
  double e32 = 0.0;
};

// Full objective through encoder and decoder on a 1x1x16x16 pair; six sampled
// entries of every trainable tensor against 64-bit central differences.
inline std::vector<TensorError> end_to_end_errors(double eps) {
  std::mt19937_64 rng(36);
  const auto ir = random_tensor<double>(Shape{1, 1, 16, 16}, rng, 0.0, 1.0);
  const auto vis = random_tensor<double>(Shape{1, 1, 16, 16}, rng, 0.0, 1.0);
  auto p = init_params<double>(8);
  // Off the symmetric initial point so every term carries gradient.
  for_each_trainable(p, [&](const std::string&, std::span<double> s) {
    std::uniform_real_distribution<double> u(-0.05, 0.05);
    for (auto& v : s) v += u(rng);
  });
  const LossWeights w;

  const auto fb64 = forward_backward(p, ir, vis, w);
  const auto fb32 = forward_backward(cast_params<float>(p), ir.cast<float>(), vis.cast<float>(), w);
  std::map<std::string, std::vector<double>> a64, a32;
  for_each_trainable(fb64.grads, [&](const std::string& n, std::span<const double> s) { a64[n] = {s.begin(), s.end()}; });
  for_each_trainable(fb32.grads, [&](const std::string& n, std::span<const float> s) { a32[n] = {s.begin(), s.end()}; });

  std::vector<TensorError> out;
  for_each_trainable(p, [&](const std::string& name, std::span<double> values) {
    std::vector<std::size_t> idx;
    std::uniform_int_distribution<std::size_t> draw(0, values.size() - 1);
    const std::size_t samples = std::min<std::size_t>(values.size(), 6);
    while (idx.size() < samples) {
      const auto i = values.size() <= 6 ? idx.size() : draw(rng);
      if (std::find(idx.begin(), idx.end(), i) == idx.end()) idx.push_back(i);
    }
    const auto numeric = numeric_gradient(values, [&] { return network_loss(p, ir, vis, w); }, idx, eps);
    // Conv biases feed batch norm, so their true gradient is zero. The floor
    // sits well below every other tensor's gradient norm (>= 0.05 here).
    constexpr double floor = 1e-3;
    out.push_back({name, relative_error(pick(a64[name], idx), numeric, floor),
                   relative_error(pick(a32[name], idx), numeric, floor)});
  });
  return out;
}

}  // namespace dftest
