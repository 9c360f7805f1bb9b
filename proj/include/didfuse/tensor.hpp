#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "didfuse/error.hpp"

namespace didfuse {

// Batch, channels, rows, cols.
struct Shape {
  int n = 1;
  int c = 1;
  int h = 1;
  int w = 1;

  [[nodiscard]] std::size_t size() const {
    return static_cast<std::size_t>(n) * c * h * w;
  }
  [[nodiscard]] std::size_t plane() const { return static_cast<std::size_t>(h) * w; }

  friend bool operator==(const Shape&, const Shape&) = default;
};

inline std::string to_string(const Shape& s) {
  std::ostringstream os;
  os << '(' << s.n << ',' << s.c << ',' << s.h << ',' << s.w << ')';
  return os.str();
}

enum class PaddingMode { Zero, Reflection };

// Batch-norm behaviour: batch statistics (Train) or running statistics (Eval).
enum class Mode { Train, Eval };

// Dense NCHW tensor, row-major with w innermost. All four dims are >= 1.
template <typename Real = float>
class Tensor4 {
 public:
  using value_type = Real;

  Tensor4() : Tensor4(Shape{}) {}

  explicit Tensor4(Shape shape, Real fill = Real(0)) : shape_(check(shape)), data_(shape.size(), fill) {}

  Tensor4(Shape shape, std::vector<Real> data) : shape_(check(shape)), data_(std::move(data)) {
    if (data_.size() != shape_.size()) {
      throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                       " does not match shape " + to_string(shape_));
    }
  }

  [[nodiscard]] const Shape& shape() const { return shape_; }
  [[nodiscard]] int n() const { return shape_.n; }
  [[nodiscard]] int c() const { return shape_.c; }
  [[nodiscard]] int h() const { return shape_.h; }
  [[nodiscard]] int w() const { return shape_.w; }
  [[nodiscard]] std::size_t size() const { return data_.size(); }

  [[nodiscard]] std::span<Real> data() { return data_; }
  [[nodiscard]] std::span<const Real> data() const { return data_; }
  [[nodiscard]] const std::vector<Real>& vec() const { return data_; }

  Real& operator[](std::size_t i) { return data_[i]; }
  const Real& operator[](std::size_t i) const { return data_[i]; }

  [[nodiscard]] std::size_t index(int b, int ch, int y, int x) const {
    return ((static_cast<std::size_t>(b) * shape_.c + ch) * shape_.h + y) * shape_.w + x;
  }
  Real& at(int b, int ch, int y, int x) { return data_[index(b, ch, y, x)]; }
  const Real& at(int b, int ch, int y, int x) const { return data_[index(b, ch, y, x)]; }

  // Contiguous h*w plane of (b, ch).
  [[nodiscard]] std::span<Real> plane(int b, int ch) {
    return std::span<Real>(data_).subspan(index(b, ch, 0, 0), shape_.plane());
  }
  [[nodiscard]] std::span<const Real> plane(int b, int ch) const {
    return std::span<const Real>(data_).subspan(index(b, ch, 0, 0), shape_.plane());
  }

  [[nodiscard]] bool all_finite() const {
    for (Real v : data_) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }

  template <typename To>
  [[nodiscard]] Tensor4<To> cast() const {
    std::vector<To> out(data_.begin(), data_.end());
    return Tensor4<To>(shape_, std::move(out));
  }

  friend bool operator==(const Tensor4&, const Tensor4&) = default;

 private:
  static Shape check(Shape s) {
    if (s.n < 1 || s.c < 1 || s.h < 1 || s.w < 1) {
      throw ShapeError("tensor dims must all be >= 1, got " + to_string(s));
    }
    return s;
  }

  Shape shape_;
  std::vector<Real> data_;
};

using Tensor = Tensor4<float>;

inline void require_same_shape(const Shape& a, const Shape& b, const char* what) {
  if (a != b) {
    throw ShapeError(std::string(what) + ": shape mismatch " + to_string(a) + " vs " + to_string(b));
  }
}

template <typename Real>
void require_finite(const Tensor4<Real>& t, const char* what) {
  if (!t.all_finite()) throw NumericError(std::string(what) + ": non-finite value in input");
}

// Element-wise helpers used by the loss and fusion code.
template <typename Real>
Tensor4<Real> add(const Tensor4<Real>& a, const Tensor4<Real>& b) {
  require_same_shape(a.shape(), b.shape(), "add");
  Tensor4<Real> out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  return out;
}

template <typename Real>
Tensor4<Real> scale(const Tensor4<Real>& a, double s) {
  Tensor4<Real> out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = static_cast<Real>(s * a[i]);
  return out;
}

template <typename Real>
void accumulate(Tensor4<Real>& into, const Tensor4<Real>& g) {
  require_same_shape(into.shape(), g.shape(), "accumulate");
  for (std::size_t i = 0; i < g.size(); ++i) into[i] += g[i];
}

}  // namespace didfuse
