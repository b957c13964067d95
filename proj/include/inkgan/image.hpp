#pragma once

// 8-bit RGB images (PNG I/O) and planar float images used by the pipeline.

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "inkgan/errors.hpp"

namespace inkgan {

/// Interleaved 8-bit RGB, row-major.
struct RgbImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> pixels;

  RgbImage() = default;
  RgbImage(std::size_t w, std::size_t h, std::uint8_t fill = 0) : width(w), height(h), pixels(w * h * 3, fill) {}

  std::uint8_t& at(std::size_t x, std::size_t y, std::size_t c) { return pixels[(y * width + x) * 3 + c]; }
  std::uint8_t at(std::size_t x, std::size_t y, std::size_t c) const { return pixels[(y * width + x) * 3 + c]; }

  bool operator==(const RgbImage&) const = default;
};

/// Planar float image [channels][height][width].
struct PlanarImage {
  std::size_t channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<float> data;

  PlanarImage() = default;
  PlanarImage(std::size_t c, std::size_t h, std::size_t w, float fill = 0.0F)
      : channels(c), height(h), width(w), data(c * h * w, fill) {}

  float& at(std::size_t c, std::size_t y, std::size_t x) { return data[(c * height + y) * width + x]; }
  float at(std::size_t c, std::size_t y, std::size_t x) const { return data[(c * height + y) * width + x]; }

  bool operator==(const PlanarImage&) const = default;
};

inline RgbImage read_png(const std::filesystem::path& path) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (png_image_begin_read_from_file(&image, path.string().c_str()) == 0) {
    throw IoError("cannot read PNG " + path.string() + ": " + image.message);
  }
  image.format = PNG_FORMAT_RGB;
  RgbImage out(image.width, image.height);
  if (png_image_finish_read(&image, nullptr, out.pixels.data(), 0, nullptr) == 0) {
    std::string msg = image.message;
    png_image_free(&image);
    throw FormatError("corrupt PNG " + path.string() + ": " + msg);
  }
  return out;
}

inline void write_png(const std::filesystem::path& path, const RgbImage& img) {
  if (img.pixels.size() != img.width * img.height * 3 || img.width == 0 || img.height == 0) {
    throw UsageError("write_png: inconsistent image buffer");
  }
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width);
  image.height = static_cast<png_uint_32>(img.height);
  image.format = PNG_FORMAT_RGB;
  if (png_image_write_to_file(&image, path.string().c_str(), 0, img.pixels.data(), 0, nullptr) == 0) {
    throw IoError("cannot write PNG " + path.string() + ": " + image.message);
  }
}

/// 8-bit RGB to planar floats in [0, 255].
inline PlanarImage to_planar(const RgbImage& img) {
  PlanarImage out(3, img.height, img.width);
  for (std::size_t y = 0; y < img.height; ++y) {
    for (std::size_t x = 0; x < img.width; ++x) {
      for (std::size_t c = 0; c < 3; ++c) out.at(c, y, x) = img.at(x, y, c);
    }
  }
  return out;
}

/// Rounds half up and clamps to [0, 255].
inline std::uint8_t to_byte(double v) {
  const double r = std::floor(v + 0.5);
  return static_cast<std::uint8_t>(r < 0.0 ? 0.0 : (r > 255.0 ? 255.0 : r));
}

/// Planar [0, 255] floats (1 or 3 channels) to 8-bit RGB.
inline RgbImage to_rgb(const PlanarImage& img) {
  if (img.channels != 1 && img.channels != 3) throw ShapeError("to_rgb needs 1 or 3 channels");
  RgbImage out(img.width, img.height);
  for (std::size_t y = 0; y < img.height; ++y) {
    for (std::size_t x = 0; x < img.width; ++x) {
      for (std::size_t c = 0; c < 3; ++c) out.at(x, y, c) = to_byte(img.at(img.channels == 1 ? 0 : c, y, x));
    }
  }
  return out;
}

/// Places images left to right; all must share a height.
inline RgbImage hconcat(const std::vector<RgbImage>& parts) {
  if (parts.empty()) throw UsageError("hconcat of zero images");
  std::size_t width = 0;
  for (const auto& p : parts) {
    if (p.height != parts[0].height) throw ShapeError("hconcat: heights differ");
    width += p.width;
  }
  RgbImage out(width, parts[0].height);
  std::size_t x0 = 0;
  for (const auto& p : parts) {
    for (std::size_t y = 0; y < p.height; ++y) {
      std::copy_n(p.pixels.begin() + y * p.width * 3, p.width * 3, out.pixels.begin() + (y * width + x0) * 3);
    }
    x0 += p.width;
  }
  return out;
}

/// Stacks images top to bottom; all must share a width.
inline RgbImage vconcat(const std::vector<RgbImage>& parts) {
  if (parts.empty()) throw UsageError("vconcat of zero images");
  RgbImage out;
  out.width = parts[0].width;
  for (const auto& p : parts) {
    if (p.width != out.width) throw ShapeError("vconcat: widths differ");
    out.height += p.height;
    out.pixels.insert(out.pixels.end(), p.pixels.begin(), p.pixels.end());
  }
  return out;
}

}  // namespace inkgan
