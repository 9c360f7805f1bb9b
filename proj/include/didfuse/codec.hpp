#pragma once

#include <png.h>

#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "didfuse/error.hpp"
#include "didfuse/image.hpp"

namespace didfuse {

namespace fs = std::filesystem;

inline std::vector<std::uint8_t> read_file_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(path.string() + ": cannot open file");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file_bytes(const fs::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError(path.string() + ": cannot open for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError(path.string() + ": write failed");
}

// ITU-R BT.601 luma, rounded half away from zero.
inline std::uint8_t luma(std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  return quantize(0.299 * r + 0.587 * g + 0.114 * b);
}

namespace detail {

class PgmReader {
 public:
  PgmReader(const std::vector<std::uint8_t>& bytes, std::string name) : bytes_(bytes), name_(std::move(name)) {}

  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (std::isspace(bytes_[pos_])) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  long next_int() {
    skip_space_and_comments();
    if (pos_ >= bytes_.size()) fail("truncated header or pixel data");
    if (!std::isdigit(bytes_[pos_])) fail("expected a decimal number");
    long v = 0;
    while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
      v = v * 10 + (bytes_[pos_] - '0');
      if (v > 1'000'000'000L) fail("number out of range");
      ++pos_;
    }
    return v;
  }

  [[noreturn]] void fail(const std::string& why) const { throw DataError(name_ + ": invalid PGM: " + why); }

  std::size_t pos_ = 0;
  const std::vector<std::uint8_t>& bytes_;
  std::string name_;
};

}  // namespace detail

// Binary (P5) or ASCII (P2) PGM with maxval 255.
inline GrayImage decode_pgm(const std::vector<std::uint8_t>& bytes, const std::string& name = "<memory>") {
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '2')) {
    throw DataError(name + ": not a P5/P2 PGM file");
  }
  const bool binary = bytes[1] == '5';
  detail::PgmReader rd(bytes, name);
  rd.pos_ = 2;
  const long w = rd.next_int();
  const long h = rd.next_int();
  const long maxval = rd.next_int();
  if (w < 1 || h < 1) rd.fail("zero-sized image");
  if (w * h > (1L << 28)) rd.fail("image too large");
  if (maxval != 255) throw DataError(name + ": unsupported PGM maxval " + std::to_string(maxval) + " (need 255)");

  GrayImage img(static_cast<int>(h), static_cast<int>(w));
  if (binary) {
    if (rd.pos_ >= bytes.size() || !std::isspace(bytes[rd.pos_])) rd.fail("missing whitespace after header");
    ++rd.pos_;
    if (bytes.size() - rd.pos_ < img.size()) {
      rd.fail("truncated pixel data (" + std::to_string(bytes.size() - rd.pos_) + " of " +
              std::to_string(img.size()) + " bytes)");
    }
    std::memcpy(img.pixels.data(), bytes.data() + rd.pos_, img.size());
  } else {
    for (auto& px : img.pixels) {
      const long v = rd.next_int();
      if (v > maxval) rd.fail("sample exceeds maxval");
      px = static_cast<std::uint8_t>(v);
    }
  }
  return img;
}

inline std::vector<std::uint8_t> encode_pgm(const GrayImage& img) {
  const std::string header = "P5\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), img.pixels.begin(), img.pixels.end());
  return out;
}

// 8-bit grayscale or RGB (palette allowed) PNG; colour is reduced with luma().
inline GrayImage decode_png(const std::vector<std::uint8_t>& bytes, const std::string& name = "<memory>") {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
    throw DataError(name + ": invalid PNG: " + image.message);
  }
  if (image.format & PNG_FORMAT_FLAG_LINEAR) {
    png_image_free(&image);
    throw DataError(name + ": unsupported PNG: 16-bit samples");
  }
  if (image.format & PNG_FORMAT_FLAG_ALPHA) {
    png_image_free(&image);
    throw DataError(name + ": unsupported PNG: alpha channel");
  }
  const bool colour = (image.format & PNG_FORMAT_FLAG_COLOR) != 0;
  image.format = colour ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  std::vector<std::uint8_t> buf(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, buf.data(), 0, nullptr)) {
    throw DataError(name + ": invalid PNG: " + image.message);
  }
  GrayImage img(static_cast<int>(image.height), static_cast<int>(image.width));
  if (colour) {
    for (std::size_t i = 0; i < img.size(); ++i) img.pixels[i] = luma(buf[3 * i], buf[3 * i + 1], buf[3 * i + 2]);
  } else {
    img.pixels = std::move(buf);
  }
  return img;
}

inline std::vector<std::uint8_t> encode_png(const GrayImage& img) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width);
  image.height = static_cast<png_uint_32>(img.height);
  image.format = PNG_FORMAT_GRAY;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&image, nullptr, &size, 0, img.pixels.data(), 0, nullptr)) {
    throw DataError(std::string("PNG encode failed: ") + image.message);
  }
  std::vector<std::uint8_t> out(size);
  if (!png_image_write_to_memory(&image, out.data(), &size, 0, img.pixels.data(), 0, nullptr)) {
    throw DataError(std::string("PNG encode failed: ") + image.message);
  }
  out.resize(size);
  return out;
}

inline GrayImage decode_image(const std::vector<std::uint8_t>& bytes, const std::string& name) {
  static const std::uint8_t kPngMagic[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1A, '\n'};
  if (bytes.size() >= 8 && std::memcmp(bytes.data(), kPngMagic, 8) == 0) return decode_png(bytes, name);
  if (bytes.size() >= 2 && bytes[0] == 'P') return decode_pgm(bytes, name);
  throw DataError(name + ": unsupported image format (expected PGM P5/P2 or PNG)");
}

// Format is chosen by file content, not extension.
inline GrayImage load_image(const fs::path& path) { return decode_image(read_file_bytes(path), path.string()); }

// Writes PNG for a .png extension, binary PGM otherwise.
inline void save_image(const GrayImage& img, const fs::path& path) {
  std::string ext = path.extension().string();
  for (auto& ch : ext) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  write_file_bytes(path, ext == ".png" ? encode_png(img) : encode_pgm(img));
}

}  // namespace didfuse
