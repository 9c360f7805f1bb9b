#pragma once

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "didfuse/image.hpp"

namespace didfuse {

// Six fusion-quality scores of one fused image against its two sources.
struct MetricsReport {
  std::string name;
  double en = 0.0;
  double mi = 0.0;
  double sd = 0.0;
  double sf = 0.0;
  double vif = 0.0;
  double ag = 0.0;
};

inline constexpr std::array<const char*, 6> kMetricNames{"EN", "MI", "SD", "SF", "VIF", "AG"};

inline std::array<double, 6> metric_values(const MetricsReport& r) { return {r.en, r.mi, r.sd, r.sf, r.vif, r.ag}; }

namespace detail {

inline void require_same_size(const GrayImage& a, const GrayImage& b, const char* what) {
  if (a.height != b.height || a.width != b.width) {
    throw ShapeError(std::string(what) + ": size mismatch " + size_string(a.height, a.width) + " vs " +
                     size_string(b.height, b.width));
  }
}

template <typename T>
void require_min_size(const Plane<T>& p, int min_side, const char* what) {
  if (p.height < min_side || p.width < min_side) {
    throw ShapeError(std::string(what) + ": image " + size_string(p.height, p.width) + " is smaller than " +
                     size_string(min_side, min_side));
  }
}

inline double entropy_of_counts(const std::vector<double>& counts, double total) {
  double h = 0.0;
  for (double c : counts) {
    if (c <= 0) continue;
    const double p = c / total;
    h -= p * std::log2(p);
  }
  return h;
}

}  // namespace detail

// Shannon entropy (bits) of the 256-bin histogram.
inline double entropy(const GrayImage& img) {
  if (img.size() == 0) throw ShapeError("entropy: empty image");
  std::vector<double> hist(256, 0.0);
  for (auto px : img.pixels) hist[px] += 1.0;
  return detail::entropy_of_counts(hist, static_cast<double>(img.size()));
}

// I(a; b) in bits from the 256x256 joint histogram.
inline double mutual_information_pair(const GrayImage& a, const GrayImage& b) {
  detail::require_same_size(a, b, "mutual_information");
  const double n = static_cast<double>(a.size());
  std::vector<double> joint(256 * 256, 0.0), ha(256, 0.0), hb(256, 0.0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    joint[a.pixels[i] * 256 + b.pixels[i]] += 1.0;
    ha[a.pixels[i]] += 1.0;
    hb[b.pixels[i]] += 1.0;
  }
  double mi = 0.0;
  for (int x = 0; x < 256; ++x) {
    if (ha[x] == 0) continue;
    for (int y = 0; y < 256; ++y) {
      const double c = joint[x * 256 + y];
      if (c == 0) continue;
      mi += (c / n) * std::log2(c * n / (ha[x] * hb[y]));
    }
  }
  return mi;
}

// MI(a, fused) + MI(b, fused).
inline double mutual_information(const GrayImage& src_a, const GrayImage& src_b, const GrayImage& fused) {
  detail::require_same_size(src_a, fused, "mutual_information");
  detail::require_same_size(src_b, fused, "mutual_information");
  return mutual_information_pair(src_a, fused) + mutual_information_pair(src_b, fused);
}

// Population standard deviation.
template <typename T>
double standard_deviation(const Plane<T>& img) {
  detail::require_min_size(img, 2, "standard_deviation");
  double mean = 0.0;
  for (T v : img.data) mean += v;
  mean /= static_cast<double>(img.size());
  double var = 0.0;
  for (T v : img.data) var += (v - mean) * (v - mean);
  return std::sqrt(var / static_cast<double>(img.size()));
}

// sqrt(RF^2 + CF^2); RF, CF are RMS horizontal / vertical forward differences.
template <typename T>
double spatial_frequency(const Plane<T>& img) {
  detail::require_min_size(img, 2, "spatial_frequency");
  const int h = img.height, w = img.width;
  double rf = 0.0, cf = 0.0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x + 1 < w; ++x) {
      const double d = static_cast<double>(img.at(y, x + 1)) - img.at(y, x);
      rf += d * d;
    }
  }
  for (int y = 0; y + 1 < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double d = static_cast<double>(img.at(y + 1, x)) - img.at(y, x);
      cf += d * d;
    }
  }
  rf /= static_cast<double>(h) * (w - 1);
  cf /= static_cast<double>(h - 1) * w;
  return std::sqrt(rf + cf);
}

// Mean of sqrt((dx^2 + dy^2) / 2) over the (h-1) x (w-1) positions that have
// both forward differences.
template <typename T>
double average_gradient(const Plane<T>& img) {
  detail::require_min_size(img, 2, "average_gradient");
  double s = 0.0;
  for (int y = 0; y + 1 < img.height; ++y) {
    for (int x = 0; x + 1 < img.width; ++x) {
      const double dx = static_cast<double>(img.at(y, x + 1)) - img.at(y, x);
      const double dy = static_cast<double>(img.at(y + 1, x)) - img.at(y, x);
      s += std::sqrt((dx * dx + dy * dy) / 2.0);
    }
  }
  return s / (static_cast<double>(img.height - 1) * (img.width - 1));
}

}  // namespace didfuse
