#pragma once

#include <algorithm>
#include <utility>

#include "didfuse/tensor.hpp"

namespace didfuse {

// Channel concatenation, a's channels first.
template <typename Real>
Tensor4<Real> concat_channels(const Tensor4<Real>& a, const Tensor4<Real>& b) {
  if (a.n() != b.n() || a.h() != b.h() || a.w() != b.w()) {
    throw ShapeError("concat_channels: batch/spatial mismatch " + to_string(a.shape()) + " vs " +
                     to_string(b.shape()));
  }
  Tensor4<Real> out(Shape{a.n(), a.c() + b.c(), a.h(), a.w()});
  const std::size_t plane = a.shape().plane();
  for (int n = 0; n < a.n(); ++n) {
    auto dst = out.data().subspan(out.index(n, 0, 0, 0));
    auto sa = a.data().subspan(a.index(n, 0, 0, 0), a.c() * plane);
    auto sb = b.data().subspan(b.index(n, 0, 0, 0), b.c() * plane);
    std::copy(sa.begin(), sa.end(), dst.begin());
    std::copy(sb.begin(), sb.end(), dst.begin() + static_cast<std::ptrdiff_t>(sa.size()));
  }
  return out;
}

// Inverse of concat_channels: first `first_channels` channels, then the rest.
template <typename Real>
std::pair<Tensor4<Real>, Tensor4<Real>> split_channels(const Tensor4<Real>& t, int first_channels) {
  if (first_channels < 1 || first_channels >= t.c()) {
    throw ShapeError("split_channels: cannot split " + std::to_string(first_channels) + " channels off " +
                     to_string(t.shape()));
  }
  const int rest = t.c() - first_channels;
  Tensor4<Real> a(Shape{t.n(), first_channels, t.h(), t.w()});
  Tensor4<Real> b(Shape{t.n(), rest, t.h(), t.w()});
  const std::size_t plane = t.shape().plane();
  for (int n = 0; n < t.n(); ++n) {
    auto src = t.data().subspan(t.index(n, 0, 0, 0), t.c() * plane);
    const auto split = static_cast<std::ptrdiff_t>(first_channels * plane);
    std::copy(src.begin(), src.begin() + split, a.data().begin() + a.index(n, 0, 0, 0));
    std::copy(src.begin() + split, src.end(), b.data().begin() + b.index(n, 0, 0, 0));
  }
  return {std::move(a), std::move(b)};
}

}  // namespace didfuse
