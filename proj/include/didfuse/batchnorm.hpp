#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "didfuse/tensor.hpp"

namespace didfuse {

inline constexpr double kBatchNormMomentum = 0.1;
inline constexpr double kBatchNormEpsilon = 1e-5;

template <typename Real>
struct BatchNormParams {
  std::vector<Real> gamma;
  std::vector<Real> beta;
  std::vector<Real> running_mean;
  std::vector<Real> running_var;

  [[nodiscard]] std::size_t channels() const { return gamma.size(); }

  static BatchNormParams identity(int channels) {
    const auto c = static_cast<std::size_t>(channels);
    return {std::vector<Real>(c, Real(1)), std::vector<Real>(c, Real(0)), std::vector<Real>(c, Real(0)),
            std::vector<Real>(c, Real(1))};
  }

  friend bool operator==(const BatchNormParams&, const BatchNormParams&) = default;
};

// What batchnorm_backward needs from the forward pass.
template <typename Real>
struct BatchNormCache {
  Mode mode = Mode::Eval;
  Tensor4<Real> normalized;     // x_hat, before the affine map
  std::vector<double> inv_std;  // per channel
};

template <typename Real>
struct BatchNormForward {
  Tensor4<Real> output;
  BatchNormCache<Real> cache;
  // Running statistics after this step's moving-average update (Train), or
  // the unchanged ones (Eval). The caller decides whether to commit them.
  std::vector<Real> next_running_mean;
  std::vector<Real> next_running_var;
  // Batch mean and unbiased variance (Train only, empty in Eval).
  std::vector<double> batch_mean;
  std::vector<double> batch_var;
};

// Exponential moving average of the running statistics towards a batch's.
template <typename Real>
void update_running_stats(BatchNormParams<Real>& params, const std::vector<double>& batch_mean,
                          const std::vector<double>& batch_var, double momentum = kBatchNormMomentum) {
  for (std::size_t c = 0; c < batch_mean.size(); ++c) {
    params.running_mean[c] = static_cast<Real>((1.0 - momentum) * params.running_mean[c] + momentum * batch_mean[c]);
    params.running_var[c] = static_cast<Real>((1.0 - momentum) * params.running_var[c] + momentum * batch_var[c]);
  }
}

template <typename Real>
BatchNormForward<Real> batchnorm_forward(const Tensor4<Real>& input, const BatchNormParams<Real>& params, Mode mode,
                                         double momentum = kBatchNormMomentum,
                                         double epsilon = kBatchNormEpsilon) {
  const int n = input.n(), c = input.c();
  if (params.channels() != static_cast<std::size_t>(c) || params.beta.size() != params.gamma.size() ||
      params.running_mean.size() != params.gamma.size() || params.running_var.size() != params.gamma.size()) {
    throw ShapeError("batchnorm: parameter length " + std::to_string(params.channels()) +
                     " does not match input " + to_string(input.shape()));
  }
  const std::size_t plane = input.shape().plane();
  const std::size_t count = static_cast<std::size_t>(n) * plane;
  if (mode == Mode::Train && count < 2) {
    throw ShapeError("batchnorm: Train mode needs at least 2 values per channel, got " + to_string(input.shape()));
  }

  BatchNormForward<Real> res{Tensor4<Real>(input.shape()), {mode, Tensor4<Real>(input.shape()), {}},
                             params.running_mean, params.running_var, {}, {}};
  res.cache.inv_std.resize(c);
  if (mode == Mode::Train) {
    res.batch_mean.resize(c);
    res.batch_var.resize(c);
  }

  for (int ch = 0; ch < c; ++ch) {
    double mean = 0.0;
    double var = 0.0;
    if (mode == Mode::Train) {
      for (int b = 0; b < n; ++b) {
        for (Real v : input.plane(b, ch)) mean += v;
      }
      mean /= static_cast<double>(count);
      for (int b = 0; b < n; ++b) {
        for (Real v : input.plane(b, ch)) var += (v - mean) * (v - mean);
      }
      const double biased = var / static_cast<double>(count);
      const double unbiased = var / static_cast<double>(count - 1);
      var = biased;
      res.batch_mean[ch] = mean;
      res.batch_var[ch] = unbiased;
      res.next_running_mean[ch] = static_cast<Real>((1.0 - momentum) * params.running_mean[ch] + momentum * mean);
      res.next_running_var[ch] = static_cast<Real>((1.0 - momentum) * params.running_var[ch] + momentum * unbiased);
    } else {
      mean = params.running_mean[ch];
      var = params.running_var[ch];
    }
    const double inv_std = 1.0 / std::sqrt(var + epsilon);
    res.cache.inv_std[ch] = inv_std;
    const double g = params.gamma[ch];
    const double be = params.beta[ch];
    for (int b = 0; b < n; ++b) {
      auto src = input.plane(b, ch);
      auto xhat = res.cache.normalized.plane(b, ch);
      auto dst = res.output.plane(b, ch);
      for (std::size_t i = 0; i < plane; ++i) {
        const double nv = (src[i] - mean) * inv_std;
        xhat[i] = static_cast<Real>(nv);
        dst[i] = static_cast<Real>(g * nv + be);
      }
    }
  }
  return res;
}

template <typename Real>
struct BatchNormGradients {
  Tensor4<Real> input;
  std::vector<Real> gamma;
  std::vector<Real> beta;
};

template <typename Real>
BatchNormGradients<Real> batchnorm_backward(const Tensor4<Real>& grad_out, const BatchNormCache<Real>& cache,
                                            const std::vector<Real>& gamma) {
  require_same_shape(grad_out.shape(), cache.normalized.shape(), "batchnorm_backward");
  const int n = grad_out.n(), c = grad_out.c();
  const std::size_t plane = grad_out.shape().plane();
  const double count = static_cast<double>(n) * static_cast<double>(plane);

  BatchNormGradients<Real> res{Tensor4<Real>(grad_out.shape()), std::vector<Real>(c), std::vector<Real>(c)};
  for (int ch = 0; ch < c; ++ch) {
    double sum_dy = 0.0;
    double sum_dy_xhat = 0.0;
    for (int b = 0; b < n; ++b) {
      auto dy = grad_out.plane(b, ch);
      auto xh = cache.normalized.plane(b, ch);
      for (std::size_t i = 0; i < plane; ++i) {
        sum_dy += dy[i];
        sum_dy_xhat += static_cast<double>(dy[i]) * xh[i];
      }
    }
    res.beta[ch] = static_cast<Real>(sum_dy);
    res.gamma[ch] = static_cast<Real>(sum_dy_xhat);

    const double scale = gamma[ch] * cache.inv_std[ch];
    for (int b = 0; b < n; ++b) {
      auto dy = grad_out.plane(b, ch);
      auto xh = cache.normalized.plane(b, ch);
      auto dx = res.input.plane(b, ch);
      if (cache.mode == Mode::Train) {
        for (std::size_t i = 0; i < plane; ++i) {
          dx[i] = static_cast<Real>(scale * (dy[i] - sum_dy / count - xh[i] * sum_dy_xhat / count));
        }
      } else {
        for (std::size_t i = 0; i < plane; ++i) dx[i] = static_cast<Real>(scale * dy[i]);
      }
    }
  }
  return res;
}

}  // namespace didfuse
