#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <ostream>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "didfuse/loss.hpp"
#include "didfuse/net.hpp"

namespace didfuse {

struct TrainConfig {
  int epochs = 120;
  int batch_size = 24;
  double lr0 = 1e-3;
  double lr_decay_factor = 10.0;
  int lr_decay_every = 40;
  std::uint64_t seed = 0;
  LossWeights loss_weights{};
  int crop_height = 128;
  int crop_width = 128;

  void validate() const {
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (!(lr0 > 0) || !std::isfinite(lr0)) throw ConfigError("lr0 must be > 0");
    if (!(lr_decay_factor > 0) || !std::isfinite(lr_decay_factor)) throw ConfigError("lr_decay_factor must be > 0");
    if (lr_decay_every < 1) throw ConfigError("lr_decay_every must be >= 1");
    if (crop_height < kMinImageSide || crop_width < kMinImageSide) {
      throw ConfigError("crop must be at least 8x8");
    }
    loss_weights.validate();
  }

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

// Step decay: lr0 / factor^floor(epoch / every).
inline double lr_at_epoch(int epoch, const TrainConfig& config) {
  if (epoch < 0) throw ConfigError("lr_at_epoch: negative epoch");
  return config.lr0 / std::pow(config.lr_decay_factor, epoch / config.lr_decay_every);
}

template <typename Real = float>
struct AdamState {
  ModelParams<Real> first_moment = zero_params<Real>();
  ModelParams<Real> second_moment = zero_params<Real>();
  std::int64_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// One bias-corrected Adam update. Gradients are checked before anything is
// modified, so a rejected step leaves params and state untouched.
template <typename Real>
void adam_step(ModelParams<Real>& params, const ModelParams<Real>& grads, AdamState<Real>& state, double lr) {
  for_each_trainable(grads, [](const std::string& name, std::span<const Real> g) {
    for (Real v : g) {
      if (!std::isfinite(v)) throw NumericError("adam_step: non-finite gradient in " + name);
    }
  });

  ++state.step;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));

  std::vector<std::span<const Real>> g_spans;
  std::vector<std::span<Real>> m_spans, v_spans;
  for_each_trainable(grads, [&](const std::string&, std::span<const Real> s) { g_spans.push_back(s); });
  for_each_trainable(state.first_moment, [&](const std::string&, std::span<Real> s) { m_spans.push_back(s); });
  for_each_trainable(state.second_moment, [&](const std::string&, std::span<Real> s) { v_spans.push_back(s); });

  std::size_t k = 0;
  for_each_trainable(params, [&](const std::string&, std::span<Real> p) {
    auto g = g_spans[k];
    auto m = m_spans[k];
    auto v = v_spans[k];
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double gi = g[i];
      const double mi = state.beta1 * m[i] + (1.0 - state.beta1) * gi;
      const double vi = state.beta2 * v[i] + (1.0 - state.beta2) * gi * gi;
      m[i] = static_cast<Real>(mi);
      v[i] = static_cast<Real>(vi);
      const double mhat = mi / bc1;
      const double vhat = vi / bc2;
      p[i] = static_cast<Real>(p[i] - lr * mhat / (std::sqrt(vhat) + state.epsilon));
    }
    ++k;
  });
}

template <typename Real = float>
struct ImagePair {
  std::string name;
  Tensor4<Real> ir;   // (1,1,h,w) in [0,1]
  Tensor4<Real> vis;  // same shape as ir
};

// Stacks single images along the batch dimension.
template <typename Real>
Tensor4<Real> stack_batch(const std::vector<const Tensor4<Real>*>& images) {
  const Shape s = images.front()->shape();
  Tensor4<Real> out(Shape{static_cast<int>(images.size()), s.c, s.h, s.w});
  std::size_t off = 0;
  for (const auto* img : images) {
    require_same_shape(img->shape(), s, "stack_batch");
    std::copy(img->data().begin(), img->data().end(), out.data().begin() + static_cast<std::ptrdiff_t>(off));
    off += img->size();
  }
  return out;
}

template <typename Real>
struct ForwardBackward {
  LossBreakdown loss;
  ModelParams<Real> grads;
  EncoderPass<Real> ir_encoder;
  EncoderPass<Real> vis_encoder;
  DecoderPass<Real> ir_decoder;
  DecoderPass<Real> vis_decoder;
};

// Runs both images through the shared encoder/decoder, evaluates the total
// loss and backpropagates it into every trainable parameter.
template <typename Real>
ForwardBackward<Real> forward_backward(const ModelParams<Real>& params, const Tensor4<Real>& ir,
                                       const Tensor4<Real>& vis, const LossWeights& weights, Mode mode = Mode::Train) {
  require_same_shape(ir.shape(), vis.shape(), "forward_backward");
  ForwardBackward<Real> fb;
  fb.ir_encoder = encode(ir, params, mode);
  fb.vis_encoder = encode(vis, params, mode);
  const auto& mi = fb.ir_encoder.maps;
  const auto& mv = fb.vis_encoder.maps;
  fb.ir_decoder = decode(mi.background, mi.detail, mi.skip1, mi.skip2, params, mode);
  fb.vis_decoder = decode(mv.background, mv.detail, mv.skip1, mv.skip2, params, mode);

  auto lg = total_loss_grad(ir, fb.ir_decoder.image, vis, fb.vis_decoder.image, mi, mv, weights);
  fb.loss = lg.breakdown;
  fb.grads = zero_params<Real>();

  auto up_ir = decoder_backward(params, fb.ir_decoder, lg.ir_hat, fb.grads);
  accumulate(up_ir.background, lg.ir_background);
  accumulate(up_ir.detail, lg.ir_detail);
  encoder_backward(params, fb.ir_encoder, up_ir, fb.grads);

  auto up_vis = decoder_backward(params, fb.vis_decoder, lg.vis_hat, fb.grads);
  accumulate(up_vis.background, lg.vis_background);
  accumulate(up_vis.detail, lg.vis_detail);
  encoder_backward(params, fb.vis_encoder, up_vis, fb.grads);
  return fb;
}

struct EpochRecord {
  int epoch = 0;  // 0-based
  double lr = 0.0;
  LossBreakdown mean_loss;
  double seconds = 0.0;
};

struct TrainLog {
  std::vector<EpochRecord> epochs;
  std::int64_t optimizer_steps = 0;
};

// One line per epoch, key=value pairs separated by spaces.
inline void write_epoch_record(std::ostream& os, const EpochRecord& r) {
  const auto& l = r.mean_loss;
  os << "epoch=" << r.epoch + 1 << " lr=" << r.lr << " total=" << l.total
     << " decomp_background=" << l.decomp_background_term << " decomp_detail=" << l.decomp_detail_term
     << " recon_ir=" << l.recon_ir << " recon_vis=" << l.recon_vis << " gradient=" << l.gradient_term
     << " seconds=" << r.seconds << '\n';
}

inline void write_train_log(std::ostream& os, const TrainLog& log) {
  for (const auto& r : log.epochs) write_epoch_record(os, r);
}

template <typename Real = float>
struct TrainResult {
  ModelParams<Real> params;
  TrainLog log;
};

namespace detail {

// Fisher-Yates driven by raw engine output, identical across standard libraries.
inline void shuffle_indices(std::vector<std::size_t>& idx, std::mt19937_64& rng) {
  for (std::size_t i = idx.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(idx[i - 1], idx[j]);
  }
}

inline void add_scaled(LossBreakdown& acc, const LossBreakdown& l, double k) {
  acc.total += k * l.total;
  acc.decomp_background_term += k * l.decomp_background_term;
  acc.decomp_detail_term += k * l.decomp_detail_term;
  acc.recon_ir += k * l.recon_ir;
  acc.recon_vis += k * l.recon_vis;
  acc.gradient_term += k * l.gradient_term;
}

}  // namespace detail

using EpochCallback = std::function<void(const EpochRecord&)>;

// Mini-batch training from seeded initial parameters. Batch losses are
// averaged; epoch records average over samples.
template <typename Real>
TrainResult<Real> train(const std::vector<ImagePair<Real>>& dataset, const TrainConfig& config,
                        const EpochCallback& on_epoch = {}) {
  config.validate();
  if (dataset.empty()) throw ConfigError("train: dataset is empty");
  for (const auto& p : dataset) {
    require_same_shape(p.ir.shape(), dataset.front().ir.shape(), "train: pair sizes");
    require_same_shape(p.vis.shape(), dataset.front().ir.shape(), "train: pair sizes");
  }

  TrainResult<Real> result{init_params<Real>(config.seed), {}};
  AdamState<Real> adam;
  std::mt19937_64 order_rng(config.seed ^ 0x9E3779B97F4A7C15ULL);
  std::vector<std::size_t> order(dataset.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  const auto batch = static_cast<std::size_t>(config.batch_size);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    const double lr = lr_at_epoch(epoch, config);
    detail::shuffle_indices(order, order_rng);

    EpochRecord record{epoch, lr, {}, 0.0};
    std::size_t batch_index = 0;
    for (std::size_t b0 = 0; b0 < order.size(); b0 += batch, ++batch_index) {
      const std::size_t b1 = std::min(order.size(), b0 + batch);
      std::vector<const Tensor4<Real>*> irs, viss;
      for (std::size_t k = b0; k < b1; ++k) {
        irs.push_back(&dataset[order[k]].ir);
        viss.push_back(&dataset[order[k]].vis);
      }
      const std::string where = "epoch " + std::to_string(epoch + 1) + ", batch " + std::to_string(batch_index);
      ForwardBackward<Real> fb;
      try {
        fb = forward_backward(result.params, stack_batch(irs), stack_batch(viss), config.loss_weights);
      } catch (const NumericError& e) {
        throw NumericError("train: " + where + ": " + e.what());
      }
      if (!std::isfinite(fb.loss.total)) throw NumericError("train: non-finite loss at " + where);
      commit_running_stats(result.params, fb.ir_encoder);
      commit_running_stats(result.params, fb.vis_encoder);
      commit_running_stats(result.params, fb.ir_decoder);
      commit_running_stats(result.params, fb.vis_decoder);
      try {
        adam_step(result.params, fb.grads, adam, lr);
      } catch (const NumericError& e) {
        throw NumericError("train: " + where + ": " + e.what());
      }
      ++result.log.optimizer_steps;
      detail::add_scaled(record.mean_loss, fb.loss,
                         static_cast<double>(b1 - b0) / static_cast<double>(dataset.size()));
    }
    record.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.log.epochs.push_back(record);
    if (on_epoch) on_epoch(record);
  }
  return result;
}

}  // namespace didfuse
