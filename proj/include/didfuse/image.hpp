#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "didfuse/tensor.hpp"

namespace didfuse {

// 8-bit single-channel image, row-major.
struct GrayImage {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> pixels;

  GrayImage() = default;
  GrayImage(int h, int w, std::uint8_t fill = 0)
      : height(h), width(w), pixels(static_cast<std::size_t>(h) * w, fill) {}
  GrayImage(int h, int w, std::vector<std::uint8_t> px) : height(h), width(w), pixels(std::move(px)) {
    if (pixels.size() != static_cast<std::size_t>(h) * w) throw ShapeError("GrayImage: pixel count mismatch");
  }

  std::uint8_t& at(int y, int x) { return pixels[static_cast<std::size_t>(y) * width + x]; }
  [[nodiscard]] std::uint8_t at(int y, int x) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
  [[nodiscard]] std::size_t size() const { return pixels.size(); }

  friend bool operator==(const GrayImage&, const GrayImage&) = default;
};

// Floating-point single-channel image, row-major.
template <typename T = double>
struct Plane {
  int height = 0;
  int width = 0;
  std::vector<T> data;

  Plane() = default;
  Plane(int h, int w, T fill = T(0)) : height(h), width(w), data(static_cast<std::size_t>(h) * w, fill) {}
  Plane(int h, int w, std::vector<T> d) : height(h), width(w), data(std::move(d)) {
    if (data.size() != static_cast<std::size_t>(h) * w) throw ShapeError("Plane: value count mismatch");
  }

  T& at(int y, int x) { return data[static_cast<std::size_t>(y) * width + x]; }
  [[nodiscard]] const T& at(int y, int x) const { return data[static_cast<std::size_t>(y) * width + x]; }
  [[nodiscard]] std::size_t size() const { return data.size(); }

  friend bool operator==(const Plane&, const Plane&) = default;
};

inline std::string size_string(int h, int w) { return std::to_string(h) + "x" + std::to_string(w); }

// Round half away from zero, clamped to [0, 255].
inline std::uint8_t quantize(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::round(v), 0.0, 255.0));
}

template <typename T = double>
Plane<T> to_plane(const GrayImage& img) {
  Plane<T> p(img.height, img.width);
  for (std::size_t i = 0; i < img.size(); ++i) p.data[i] = static_cast<T>(img.pixels[i]);
  return p;
}

template <typename T>
GrayImage to_gray(const Plane<T>& p) {
  GrayImage g(p.height, p.width);
  for (std::size_t i = 0; i < p.size(); ++i) g.pixels[i] = quantize(static_cast<double>(p.data[i]));
  return g;
}

// (1,1,h,w) tensor with values pixel / 255.
template <typename Real = float>
Tensor4<Real> to_tensor(const GrayImage& img) {
  Tensor4<Real> t(Shape{1, 1, img.height, img.width});
  for (std::size_t i = 0; i < img.size(); ++i) t[i] = static_cast<Real>(img.pixels[i] / 255.0);
  return t;
}

// Plane of one tensor channel scaled by `gain` (255 maps [0,1] to 8-bit range).
template <typename Real>
Plane<double> tensor_plane(const Tensor4<Real>& t, int batch = 0, int channel = 0, double gain = 255.0) {
  Plane<double> p(t.h(), t.w());
  auto src = t.plane(batch, channel);
  for (std::size_t i = 0; i < src.size(); ++i) p.data[i] = gain * static_cast<double>(src[i]);
  return p;
}

template <typename Real>
GrayImage tensor_to_gray(const Tensor4<Real>& t, int batch = 0, int channel = 0) {
  return to_gray(tensor_plane(t, batch, channel, 255.0));
}

}  // namespace didfuse
