#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "didfuse/activation.hpp"
#include "didfuse/batchnorm.hpp"
#include "didfuse/concat.hpp"
#include "didfuse/conv.hpp"
#include "didfuse/tensor.hpp"

namespace didfuse {

struct LayerSpec {
  const char* name;
  int in_channels;
  int out_channels;
  PaddingMode padding;
  Activation activation;
};

inline constexpr int kFeatureChannels = 64;
inline constexpr int kMinImageSide = 8;
inline constexpr int kModelFormatVersion = 1;

// Encoder conv1..conv4, decoder conv5..conv7. conv6 and conv7 take 128
// channels because their skip inputs are concatenated, not added.
inline constexpr std::array<LayerSpec, 7> kLayers{{
    {"conv1", 1, 64, PaddingMode::Reflection, Activation::PReLU},
    {"conv2", 64, 64, PaddingMode::Zero, Activation::PReLU},
    {"conv3", 64, 64, PaddingMode::Zero, Activation::Tanh},
    {"conv4", 64, 64, PaddingMode::Zero, Activation::Tanh},
    {"conv5", 128, 64, PaddingMode::Zero, Activation::PReLU},
    {"conv6", 128, 64, PaddingMode::Zero, Activation::PReLU},
    {"conv7", 128, 1, PaddingMode::Reflection, Activation::Sigmoid},
}};

enum LayerIndex : std::size_t { kConv1 = 0, kConv2, kConv3, kConv4, kConv5, kConv6, kConv7 };

template <typename Real>
struct ConvLayerParams {
  Tensor4<Real> kernel;            // (outC, inC, 3, 3)
  std::vector<Real> bias;          // outC
  BatchNormParams<Real> bn;        // outC each
  std::vector<Real> prelu_slope;   // one shared slope for PReLU layers, empty otherwise

  friend bool operator==(const ConvLayerParams&, const ConvLayerParams&) = default;
};

template <typename Real = float>
struct ModelParams {
  std::array<ConvLayerParams<Real>, 7> layers;
  int format_version = kModelFormatVersion;

  [[nodiscard]] std::span<const ConvLayerParams<Real>> encoder() const { return {layers.data(), 4}; }
  [[nodiscard]] std::span<const ConvLayerParams<Real>> decoder() const { return {layers.data() + 4, 3}; }

  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

// Zero-filled parameters with the network's shapes; also the gradient container.
template <typename Real = float>
ModelParams<Real> zero_params() {
  ModelParams<Real> p;
  for (std::size_t l = 0; l < kLayers.size(); ++l) {
    const LayerSpec& s = kLayers[l];
    auto& layer = p.layers[l];
    layer.kernel = Tensor4<Real>(Shape{s.out_channels, s.in_channels, 3, 3});
    layer.bias.assign(s.out_channels, Real(0));
    layer.bn = {std::vector<Real>(s.out_channels), std::vector<Real>(s.out_channels),
                std::vector<Real>(s.out_channels), std::vector<Real>(s.out_channels)};
    if (s.activation == Activation::PReLU) layer.prelu_slope.assign(1, Real(0));
  }
  return p;
}

// Kernels ~ U(-b, b), b = sqrt(6 / (inC * 9)); the uniform draw is built
// from raw 64-bit engine output so it is identical on every standard library.
template <typename Real = float>
ModelParams<Real> init_params(std::uint64_t seed) {
  ModelParams<Real> p = zero_params<Real>();
  std::mt19937_64 rng(seed);
  for (std::size_t l = 0; l < kLayers.size(); ++l) {
    const LayerSpec& s = kLayers[l];
    auto& layer = p.layers[l];
    const double bound = std::sqrt(6.0 / (s.in_channels * 9.0));
    for (auto& v : layer.kernel.data()) {
      const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
      v = static_cast<Real>((2.0 * u - 1.0) * bound);
    }
    layer.bn = BatchNormParams<Real>::identity(s.out_channels);
    if (s.activation == Activation::PReLU) layer.prelu_slope.assign(1, static_cast<Real>(kPReluInitialSlope));
  }
  return p;
}

template <typename Real>
std::size_t trainable_parameter_count(const ModelParams<Real>& p) {
  std::size_t total = 0;
  for (const auto& layer : p.layers) {
    total += layer.kernel.size() + layer.bias.size() + layer.bn.gamma.size() + layer.bn.beta.size() +
             layer.prelu_slope.size();
  }
  return total;
}

// Visits every trainable array with a stable name ("conv3.kernel", ...).
template <typename Params, typename F>
void for_each_trainable(Params& p, F&& f) {
  for (std::size_t l = 0; l < kLayers.size(); ++l) {
    const std::string name = kLayers[l].name;
    auto& layer = p.layers[l];
    f(name + ".kernel", std::span(layer.kernel.data()));
    f(name + ".bias", std::span(layer.bias));
    f(name + ".bn_gamma", std::span(layer.bn.gamma));
    f(name + ".bn_beta", std::span(layer.bn.beta));
    if (!layer.prelu_slope.empty()) f(name + ".prelu_slope", std::span(layer.prelu_slope));
  }
}

// Everything one conv -> batch-norm -> activation block needs for backward.
template <typename Real>
struct LayerTape {
  Tensor4<Real> input;
  BatchNormCache<Real> bn;
  Tensor4<Real> pre_activation;
  Tensor4<Real> output;
  std::vector<double> batch_mean;  // Train mode only
  std::vector<double> batch_var;
};

template <typename Real>
double layer_slope(const ConvLayerParams<Real>& layer) {
  return layer.prelu_slope.empty() ? kPReluInitialSlope : static_cast<double>(layer.prelu_slope[0]);
}

template <typename Real>
LayerTape<Real> layer_forward(const ConvLayerParams<Real>& layer, const LayerSpec& spec, const Tensor4<Real>& input,
                              Mode mode) {
  auto conv = conv2d_forward(input, layer.kernel, std::span<const Real>(layer.bias), spec.padding);
  auto bn = batchnorm_forward(conv, layer.bn, mode);
  auto out = activation_forward(bn.output, spec.activation, layer_slope(layer));
  return {input, std::move(bn.cache), std::move(bn.output), std::move(out), std::move(bn.batch_mean),
          std::move(bn.batch_var)};
}

// Accumulates parameter gradients into `grads`; returns d(loss)/d(input).
template <typename Real>
Tensor4<Real> layer_backward(const ConvLayerParams<Real>& layer, const LayerSpec& spec, const LayerTape<Real>& tape,
                             const Tensor4<Real>& grad_out, ConvLayerParams<Real>& grads) {
  auto act = activation_backward(grad_out, tape.pre_activation, tape.output, spec.activation, layer_slope(layer));
  if (!grads.prelu_slope.empty()) grads.prelu_slope[0] += static_cast<Real>(act.slope);
  auto bn = batchnorm_backward(act.input, tape.bn, layer.bn.gamma);
  for (std::size_t c = 0; c < bn.gamma.size(); ++c) {
    grads.bn.gamma[c] += bn.gamma[c];
    grads.bn.beta[c] += bn.beta[c];
  }
  auto conv = conv2d_backward(bn.input, tape.input, layer.kernel, spec.padding);
  accumulate(grads.kernel, conv.kernel);
  for (std::size_t c = 0; c < conv.bias.size(); ++c) grads.bias[c] += conv.bias[c];
  return std::move(conv.input);
}

template <typename Real = float>
struct DecomposeOutput {
  Tensor4<Real> background;  // conv3, (n,64,h,w)
  Tensor4<Real> detail;      // conv4, (n,64,h,w)
  Tensor4<Real> skip1;       // conv1 activation, routed to conv7
  Tensor4<Real> skip2;       // conv2 activation, routed to conv6
};

template <typename Real>
struct EncoderPass {
  DecomposeOutput<Real> maps;
  std::array<LayerTape<Real>, 4> tape;
};

template <typename Real>
struct DecoderPass {
  Tensor4<Real> image;
  std::array<LayerTape<Real>, 3> tape;
};

template <typename Real>
EncoderPass<Real> encode(const Tensor4<Real>& image, const ModelParams<Real>& params, Mode mode) {
  if (image.c() != 1) {
    throw ShapeError("decompose: expected a single-channel image, got " + to_string(image.shape()));
  }
  if (image.h() < kMinImageSide || image.w() < kMinImageSide) {
    throw ShapeError("decompose: image must be at least 8x8, got " + to_string(image.shape()));
  }
  EncoderPass<Real> pass;
  pass.tape[0] = layer_forward(params.layers[kConv1], kLayers[kConv1], image, mode);
  pass.tape[1] = layer_forward(params.layers[kConv2], kLayers[kConv2], pass.tape[0].output, mode);
  pass.tape[2] = layer_forward(params.layers[kConv3], kLayers[kConv3], pass.tape[1].output, mode);
  pass.tape[3] = layer_forward(params.layers[kConv4], kLayers[kConv4], pass.tape[1].output, mode);
  pass.maps = {pass.tape[2].output, pass.tape[3].output, pass.tape[0].output, pass.tape[1].output};
  return pass;
}

template <typename Real>
DecomposeOutput<Real> decompose(const Tensor4<Real>& image, const ModelParams<Real>& params, Mode mode) {
  return encode(image, params, mode).maps;
}

template <typename Real>
DecoderPass<Real> decode(const Tensor4<Real>& background, const Tensor4<Real>& detail, const Tensor4<Real>& skip1,
                         const Tensor4<Real>& skip2, const ModelParams<Real>& params, Mode mode) {
  const Shape expect{background.n(), kFeatureChannels, background.h(), background.w()};
  require_same_shape(background.shape(), expect, "reconstruct background");
  require_same_shape(detail.shape(), expect, "reconstruct detail");
  require_same_shape(skip1.shape(), expect, "reconstruct skip1");
  require_same_shape(skip2.shape(), expect, "reconstruct skip2");
  DecoderPass<Real> pass;
  pass.tape[0] = layer_forward(params.layers[kConv5], kLayers[kConv5], concat_channels(background, detail), mode);
  pass.tape[1] = layer_forward(params.layers[kConv6], kLayers[kConv6], concat_channels(pass.tape[0].output, skip2), mode);
  pass.tape[2] = layer_forward(params.layers[kConv7], kLayers[kConv7], concat_channels(pass.tape[1].output, skip1), mode);
  pass.image = pass.tape[2].output;
  return pass;
}

template <typename Real>
Tensor4<Real> reconstruct(const Tensor4<Real>& background, const Tensor4<Real>& detail, const Tensor4<Real>& skip1,
                          const Tensor4<Real>& skip2, const ModelParams<Real>& params, Mode mode) {
  return decode(background, detail, skip1, skip2, params, mode).image;
}

template <typename Real>
Tensor4<Real> reconstruct(const DecomposeOutput<Real>& maps, const ModelParams<Real>& params, Mode mode) {
  return reconstruct(maps.background, maps.detail, maps.skip1, maps.skip2, params, mode);
}

// Gradients flowing out of the decoder into its four inputs.
template <typename Real>
struct DecoderInputGradients {
  Tensor4<Real> background;
  Tensor4<Real> detail;
  Tensor4<Real> skip1;
  Tensor4<Real> skip2;
};

template <typename Real>
DecoderInputGradients<Real> decoder_backward(const ModelParams<Real>& params, const DecoderPass<Real>& pass,
                                             const Tensor4<Real>& grad_image, ModelParams<Real>& grads) {
  auto g7 = layer_backward(params.layers[kConv7], kLayers[kConv7], pass.tape[2], grad_image, grads.layers[kConv7]);
  auto [g6_out, g_skip1] = split_channels(g7, kFeatureChannels);
  auto g6 = layer_backward(params.layers[kConv6], kLayers[kConv6], pass.tape[1], g6_out, grads.layers[kConv6]);
  auto [g5_out, g_skip2] = split_channels(g6, kFeatureChannels);
  auto g5 = layer_backward(params.layers[kConv5], kLayers[kConv5], pass.tape[0], g5_out, grads.layers[kConv5]);
  auto [g_b, g_d] = split_channels(g5, kFeatureChannels);
  return {std::move(g_b), std::move(g_d), std::move(g_skip1), std::move(g_skip2)};
}

// Backpropagates into the encoder given gradients w.r.t. all four of its outputs.
template <typename Real>
Tensor4<Real> encoder_backward(const ModelParams<Real>& params, const EncoderPass<Real>& pass,
                               const DecoderInputGradients<Real>& upstream, ModelParams<Real>& grads) {
  auto g_from_b = layer_backward(params.layers[kConv3], kLayers[kConv3], pass.tape[2], upstream.background,
                                 grads.layers[kConv3]);
  auto g_from_d =
      layer_backward(params.layers[kConv4], kLayers[kConv4], pass.tape[3], upstream.detail, grads.layers[kConv4]);
  Tensor4<Real> g2 = add(g_from_b, g_from_d);
  accumulate(g2, upstream.skip2);
  Tensor4<Real> g1 = layer_backward(params.layers[kConv2], kLayers[kConv2], pass.tape[1], g2, grads.layers[kConv2]);
  accumulate(g1, upstream.skip1);
  return layer_backward(params.layers[kConv1], kLayers[kConv1], pass.tape[0], g1, grads.layers[kConv1]);
}

// Folds the batch statistics recorded by a Train-mode pass into the running
// statistics. Eval-mode passes record none and leave params untouched.
template <typename Real, std::size_t N>
void commit_running_stats(ModelParams<Real>& params, const std::array<LayerTape<Real>, N>& tape,
                          std::size_t first_layer) {
  for (std::size_t i = 0; i < N; ++i) {
    update_running_stats(params.layers[first_layer + i].bn, tape[i].batch_mean, tape[i].batch_var);
  }
}

template <typename Real>
void commit_running_stats(ModelParams<Real>& params, const EncoderPass<Real>& pass) {
  commit_running_stats(params, pass.tape, kConv1);
}

template <typename Real>
void commit_running_stats(ModelParams<Real>& params, const DecoderPass<Real>& pass) {
  commit_running_stats(params, pass.tape, kConv5);
}

template <typename To, typename From>
ModelParams<To> cast_params(const ModelParams<From>& p) {
  ModelParams<To> out;
  out.format_version = p.format_version;
  auto cv = [](const std::vector<From>& v) { return std::vector<To>(v.begin(), v.end()); };
  for (std::size_t l = 0; l < kLayers.size(); ++l) {
    const auto& s = p.layers[l];
    out.layers[l] = {s.kernel.template cast<To>(), cv(s.bias),
                     {cv(s.bn.gamma), cv(s.bn.beta), cv(s.bn.running_mean), cv(s.bn.running_var)},
                     cv(s.prelu_slope)};
  }
  return out;
}

}  // namespace didfuse
