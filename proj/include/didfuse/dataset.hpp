#pragma once

#include <algorithm>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "didfuse/codec.hpp"
#include "didfuse/image.hpp"
#include "didfuse/trainer.hpp"

namespace didfuse {

struct CropOffset {
  int row = 0;
  int col = 0;
  friend bool operator==(const CropOffset&, const CropOffset&) = default;
};

inline CropOffset center_crop_offset(int height, int width, int crop_h, int crop_w) {
  return {(height - crop_h) / 2, (width - crop_w) / 2};
}

inline GrayImage crop(const GrayImage& img, int row, int col, int h, int w) {
  if (row < 0 || col < 0 || row + h > img.height || col + w > img.width) {
    throw ShapeError("crop: window " + size_string(h, w) + " at (" + std::to_string(row) + "," +
                     std::to_string(col) + ") exceeds image " + size_string(img.height, img.width));
  }
  GrayImage out(h, w);
  for (int y = 0; y < h; ++y) {
    std::copy_n(img.pixels.begin() + static_cast<std::ptrdiff_t>(row + y) * img.width + col, w,
                out.pixels.begin() + static_cast<std::ptrdiff_t>(y) * w);
  }
  return out;
}

// Train: centre crop to crop_h x crop_w. Eval: keep the image but drop a
// trailing row/column so both dims are even. Values are scaled to [0,1].
template <typename Real = float>
Tensor4<Real> preprocess(const GrayImage& img, Mode mode, int crop_h = 128, int crop_w = 128) {
  if (mode == Mode::Train) {
    if (img.height < crop_h || img.width < crop_w) {
      throw DataError("image " + size_string(img.height, img.width) + " is smaller than the training crop " +
                      size_string(crop_h, crop_w));
    }
    const auto off = center_crop_offset(img.height, img.width, crop_h, crop_w);
    return to_tensor<Real>(crop(img, off.row, off.col, crop_h, crop_w));
  }
  const int h = img.height - img.height % 2;
  const int w = img.width - img.width % 2;
  if (h < 1 || w < 1) throw DataError("image " + size_string(img.height, img.width) + " is too small");
  return to_tensor<Real>(h == img.height && w == img.width ? img : crop(img, 0, 0, h, w));
}

struct PairEntry {
  std::string name;
  fs::path ir;
  fs::path vis;
};

// Infrared/visible pairs matched by identical filenames under <root>/ir and
// <root>/vis (or <root>/<split>/ir ...), sorted lexicographically.
struct PairedDataset {
  fs::path root;
  std::string split;
  std::vector<PairEntry> pairs;
  std::vector<std::string> unmatched;  // present in only one of the two folders

  static PairedDataset scan(const fs::path& dir, const std::string& split = "") {
    PairedDataset ds{dir, split, {}, {}};
    fs::path base = dir;
    if (!split.empty() && fs::is_directory(dir / split)) base = dir / split;
    const fs::path ir_dir = base / "ir";
    const fs::path vis_dir = base / "vis";
    if (!fs::is_directory(ir_dir) || !fs::is_directory(vis_dir)) {
      throw DataError(base.string() + ": expected 'ir' and 'vis' subdirectories");
    }
    const auto ir = list_images(ir_dir);
    const auto vis = list_images(vis_dir);
    std::set_symmetric_difference(ir.begin(), ir.end(), vis.begin(), vis.end(), std::back_inserter(ds.unmatched));
    std::vector<std::string> common;
    std::set_intersection(ir.begin(), ir.end(), vis.begin(), vis.end(), std::back_inserter(common));
    for (const auto& name : common) ds.pairs.push_back({name, ir_dir / name, vis_dir / name});
    return ds;
  }

  [[nodiscard]] bool empty() const { return pairs.empty(); }
  [[nodiscard]] std::size_t size() const { return pairs.size(); }

 private:
  static std::vector<std::string> list_images(const fs::path& dir) {
    std::vector<std::string> names;
    for (const auto& e : fs::directory_iterator(dir)) {
      if (!e.is_regular_file()) continue;
      std::string ext = e.path().extension().string();
      for (auto& ch : ext) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
      if (ext == ".pgm" || ext == ".png") names.push_back(e.path().filename().string());
    }
    std::sort(names.begin(), names.end());
    return names;
  }
};

template <typename Real = float>
ImagePair<Real> load_pair(const PairEntry& entry, Mode mode, int crop_h = 128, int crop_w = 128) {
  const GrayImage ir = load_image(entry.ir);
  const GrayImage vis = load_image(entry.vis);
  if (ir.height != vis.height || ir.width != vis.width) {
    throw DataError(entry.name + ": infrared " + size_string(ir.height, ir.width) + " and visible " +
                    size_string(vis.height, vis.width) + " sizes differ");
  }
  return {entry.name, preprocess<Real>(ir, mode, crop_h, crop_w), preprocess<Real>(vis, mode, crop_h, crop_w)};
}

template <typename Real = float>
std::vector<ImagePair<Real>> load_training_set(const PairedDataset& ds, const TrainConfig& config) {
  std::vector<ImagePair<Real>> out;
  out.reserve(ds.size());
  for (const auto& e : ds.pairs) out.push_back(load_pair<Real>(e, Mode::Train, config.crop_height, config.crop_width));
  return out;
}

}  // namespace didfuse
