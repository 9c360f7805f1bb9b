#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include "didfuse/dataset.hpp"
#include "didfuse/fusion.hpp"
#include "didfuse/metrics.hpp"
#include "didfuse/vif.hpp"

namespace didfuse {

// Scores a fused image (0..255 float scale) against its 8-bit sources. EN and
// MI use the quantized fused image; SD, SF, AG and VIF the float one.
inline MetricsReport score_fusion(const GrayImage& ir, const GrayImage& vis, const Plane<double>& fused,
                                  std::string name = {}) {
  if (ir.height != fused.height || ir.width != fused.width || vis.height != fused.height ||
      vis.width != fused.width) {
    throw ShapeError("score_fusion: sources " + size_string(ir.height, ir.width) + " / " +
                     size_string(vis.height, vis.width) + " do not match fused " +
                     size_string(fused.height, fused.width));
  }
  const GrayImage fused8 = to_gray(fused);
  MetricsReport r;
  r.name = std::move(name);
  r.en = entropy(fused8);
  r.mi = mutual_information(ir, vis, fused8);
  r.sd = standard_deviation(fused);
  r.sf = spatial_frequency(fused);
  r.ag = average_gradient(fused);
  r.vif = vif_fusion(to_plane(ir), to_plane(vis), fused);
  return r;
}

// Dataset mean and population standard deviation of each metric.
struct MetricSummary {
  std::array<double, 6> mean{};
  std::array<double, 6> stddev{};
};

inline MetricSummary summarize(const std::vector<MetricsReport>& reports) {
  MetricSummary s;
  if (reports.empty()) return s;
  const double n = static_cast<double>(reports.size());
  for (const auto& r : reports) {
    const auto v = metric_values(r);
    for (std::size_t k = 0; k < v.size(); ++k) s.mean[k] += v[k] / n;
  }
  for (const auto& r : reports) {
    const auto v = metric_values(r);
    for (std::size_t k = 0; k < v.size(); ++k) s.stddev[k] += (v[k] - s.mean[k]) * (v[k] - s.mean[k]) / n;
  }
  for (double& v : s.stddev) v = std::sqrt(v);
  return s;
}

struct DirectoryScore {
  std::string method;
  std::vector<MetricsReport> per_image;
  MetricSummary summary;
  std::vector<std::string> skipped;  // "name: reason"
};

// Produces the fused image (0..255 scale) for one pair of 8-bit sources.
using FusedSource = std::function<Plane<double>(const GrayImage& ir, const GrayImage& vis, const PairEntry& entry)>;

// Fused images from a trained model: Eval preprocessing, then fuse_images.
inline FusedSource model_source(const ModelParams<float>& params, FusionStrategy strategy) {
  return [&params, strategy](const GrayImage& ir, const GrayImage& vis, const PairEntry&) {
    const auto fused = fuse_images(preprocess<float>(ir, Mode::Eval), preprocess<float>(vis, Mode::Eval), params,
                                   strategy);
    return tensor_plane(fused, 0, 0, 255.0);
  };
}

// Fused images read from <dir>/<pair name>.
inline FusedSource directory_source(fs::path dir) {
  return [dir = std::move(dir)](const GrayImage&, const GrayImage&, const PairEntry& entry) {
    return to_plane(load_image(dir / entry.name));
  };
}

namespace detail {

inline MetricsReport score_entry(const PairEntry& entry, const FusedSource& source) {
  GrayImage ir = load_image(entry.ir);
  GrayImage vis = load_image(entry.vis);
  if (ir.height != vis.height || ir.width != vis.width) {
    throw DataError("infrared " + size_string(ir.height, ir.width) + " and visible " +
                    size_string(vis.height, vis.width) + " sizes differ");
  }
  const Plane<double> fused = source(ir, vis, entry);
  // Eval preprocessing may have dropped a trailing row/column.
  if (fused.height <= ir.height && fused.width <= ir.width && ir.height - fused.height <= 1 &&
      ir.width - fused.width <= 1) {
    ir = crop(ir, 0, 0, fused.height, fused.width);
    vis = crop(vis, 0, 0, fused.height, fused.width);
  }
  return score_fusion(ir, vis, fused, entry.name);
}

}  // namespace detail

// Scores every pair on up to `threads` workers (0: one per hardware thread).
// Results keep the dataset order. Unreadable or misaligned pairs are skipped
// and reported through `warn` and DirectoryScore::skipped.
inline DirectoryScore score_directory(const PairedDataset& ds, const std::string& method, const FusedSource& source,
                                      std::ostream* warn = nullptr, unsigned threads = 0) {
  const std::size_t n = ds.pairs.size();
  std::vector<std::optional<MetricsReport>> reports(n);
  std::vector<std::string> errors(n);
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        reports[i] = detail::score_entry(ds.pairs[i], source);
      } catch (const Error& e) {
        errors[i] = e.what();
      }
    }
  };
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(n, 1)));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < threads; ++t) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();

  DirectoryScore out{method, {}, {}, {}};
  for (std::size_t i = 0; i < n; ++i) {
    if (reports[i]) {
      out.per_image.push_back(std::move(*reports[i]));
    } else {
      out.skipped.push_back(ds.pairs[i].name + ": " + errors[i]);
      if (warn) *warn << "warning: skipping " << ds.pairs[i].name << ": " << errors[i] << '\n';
    }
  }
  out.summary = summarize(out.per_image);
  return out;
}

namespace detail {

inline std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace detail

// Header row of metric names, then one "mean±std" row per method.
inline void write_summary_table(std::ostream& os, const std::vector<DirectoryScore>& scores, char delim = '\t') {
  os << "method";
  for (const char* m : kMetricNames) os << delim << m;
  os << delim << "images" << delim << "skipped" << '\n';
  for (const auto& s : scores) {
    os << s.method;
    for (std::size_t k = 0; k < kMetricNames.size(); ++k) {
      os << delim << detail::fixed(s.summary.mean[k], 3) << "\xC2\xB1" << detail::fixed(s.summary.stddev[k], 3);
    }
    os << delim << s.per_image.size() << delim << s.skipped.size() << '\n';
  }
}

inline void write_per_image(std::ostream& os, const std::vector<DirectoryScore>& scores, char delim = '\t') {
  os << "method" << delim << "image";
  for (const char* m : kMetricNames) os << delim << m;
  os << '\n';
  for (const auto& s : scores) {
    for (const auto& r : s.per_image) {
      os << s.method << delim << r.name;
      for (double v : metric_values(r)) os << delim << detail::fixed(v, 6);
      os << '\n';
    }
  }
}

}  // namespace didfuse
