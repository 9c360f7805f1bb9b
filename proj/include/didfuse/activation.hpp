#pragma once

#include <cmath>

#include "didfuse/tensor.hpp"

namespace didfuse {

enum class Activation { PReLU, Tanh, Sigmoid };

inline constexpr double kPReluInitialSlope = 0.25;

inline const char* to_string(Activation a) {
  switch (a) {
    case Activation::PReLU:
      return "PReLU";
    case Activation::Tanh:
      return "Tanh";
    case Activation::Sigmoid:
      return "Sigmoid";
  }
  return "?";
}

inline double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// slope is only read for PReLU.
template <typename Real>
Tensor4<Real> activation_forward(const Tensor4<Real>& input, Activation kind, double slope = kPReluInitialSlope) {
  Tensor4<Real> out(input.shape());
  for (std::size_t i = 0; i < input.size(); ++i) {
    const double x = input[i];
    double y = 0.0;
    switch (kind) {
      case Activation::PReLU:
        y = x >= 0 ? x : slope * x;
        break;
      case Activation::Tanh:
        y = std::tanh(x);
        break;
      case Activation::Sigmoid:
        y = sigmoid(x);
        break;
    }
    out[i] = static_cast<Real>(y);
  }
  return out;
}

template <typename Real>
struct ActivationGradients {
  Tensor4<Real> input;
  double slope = 0.0;  // PReLU only
};

// Tanh and sigmoid differentiate through their saved output; PReLU through its input.
template <typename Real>
ActivationGradients<Real> activation_backward(const Tensor4<Real>& grad_out, const Tensor4<Real>& input,
                                              const Tensor4<Real>& output, Activation kind,
                                              double slope = kPReluInitialSlope) {
  require_same_shape(grad_out.shape(), input.shape(), "activation_backward");
  require_same_shape(grad_out.shape(), output.shape(), "activation_backward");
  ActivationGradients<Real> res{Tensor4<Real>(input.shape()), 0.0};
  for (std::size_t i = 0; i < input.size(); ++i) {
    const double g = grad_out[i];
    double d = 0.0;
    switch (kind) {
      case Activation::PReLU:
        if (input[i] >= 0) {
          d = g;
        } else {
          d = slope * g;
          res.slope += g * input[i];
        }
        break;
      case Activation::Tanh: {
        const double y = output[i];
        d = g * (1.0 - y * y);
        break;
      }
      case Activation::Sigmoid: {
        const double y = output[i];
        d = g * y * (1.0 - y);
        break;
      }
    }
    res.input[i] = static_cast<Real>(d);
  }
  return res;
}

}  // namespace didfuse
