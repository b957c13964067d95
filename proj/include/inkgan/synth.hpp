#pragma once

// Procedural stand-in for the anime sketch/color pair dataset. Each raw pair
// is a size x 2*size RGB image: a flat-shaded scene of circles, boxes and
// triangles on the left, and its black line art on white on the right. Fill
// colors are tied to shape type, so the sketch determines the colorization up
// to a small per-shape tint.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "inkgan/data.hpp"
#include "inkgan/image.hpp"
#include "inkgan/random.hpp"

namespace inkgan {

namespace detail {

struct Shape2D {
  int kind;  // 0 circle, 1 box, 2 triangle
  double cx, cy, r;
};

inline bool inside(const Shape2D& s, double x, double y) {
  const double dx = x - s.cx, dy = y - s.cy;
  switch (s.kind) {
    case 0: return dx * dx + dy * dy <= s.r * s.r;
    case 1: return std::abs(dx) <= s.r * 0.85 && std::abs(dy) <= s.r * 0.85;
    default: {
      // Upward isosceles triangle with apex at (cx, cy - r).
      if (dy < -s.r || dy > s.r * 0.8) return false;
      const double half_width = (dy + s.r) / 1.8 * 0.95;
      return std::abs(dx) <= half_width;
    }
  }
}

}  // namespace detail

/// Renders one synthetic raw pair (color | sketch) of height `size`.
inline RgbImage synth_pair(std::size_t size, std::uint64_t seed) {
  static constexpr std::array<std::array<int, 3>, 3> kFill{{{215, 60, 70}, {55, 95, 205}, {60, 165, 85}}};
  static constexpr std::array<int, 3> kBackground{242, 228, 200};
  Rng rng(seed);
  const double s = static_cast<double>(size);
  const int count = 2 + static_cast<int>(rng() % 3);
  std::vector<detail::Shape2D> shapes;
  std::vector<std::array<int, 3>> fills;
  for (int i = 0; i < count; ++i) {
    detail::Shape2D sh{static_cast<int>(rng() % 3), 0, 0, 0};
    sh.r = s * (0.12 + 0.12 * uniform01(rng));
    sh.cx = sh.r + (s - 2 * sh.r) * uniform01(rng);
    sh.cy = sh.r + (s - 2 * sh.r) * uniform01(rng);
    shapes.push_back(sh);
    std::array<int, 3> fill = kFill[static_cast<std::size_t>(sh.kind)];
    const int tint = static_cast<int>(rng() % 31) - 15;
    for (auto& c : fill) c = std::clamp(c + tint, 0, 255);
    fills.push_back(fill);
  }

  // Label map: index of the topmost shape covering each pixel, -1 for background.
  std::vector<int> label(size * size, -1);
  for (std::size_t y = 0; y < size; ++y) {
    for (std::size_t x = 0; x < size; ++x) {
      for (int i = count - 1; i >= 0; --i) {
        if (detail::inside(shapes[static_cast<std::size_t>(i)], static_cast<double>(x) + 0.5, static_cast<double>(y) + 0.5)) {
          label[y * size + x] = i;
          break;
        }
      }
    }
  }

  RgbImage color(size, size), sketch(size, size, 255);
  const auto line = static_cast<std::ptrdiff_t>(std::max<std::size_t>(1, size / 64));
  for (std::size_t y = 0; y < size; ++y) {
    for (std::size_t x = 0; x < size; ++x) {
      const int l = label[y * size + x];
      const auto& fill = l < 0 ? kBackground : fills[static_cast<std::size_t>(l)];
      for (std::size_t c = 0; c < 3; ++c) color.at(x, y, c) = static_cast<std::uint8_t>(fill[c]);
      bool edge = false;
      for (std::ptrdiff_t dy = -line; dy <= line && !edge; ++dy) {
        for (std::ptrdiff_t dx = -line; dx <= line && !edge; ++dx) {
          const auto yy = static_cast<std::ptrdiff_t>(y) + dy;
          const auto xx = static_cast<std::ptrdiff_t>(x) + dx;
          if (yy < 0 || xx < 0 || yy >= static_cast<std::ptrdiff_t>(size) || xx >= static_cast<std::ptrdiff_t>(size)) continue;
          edge = label[static_cast<std::size_t>(yy) * size + static_cast<std::size_t>(xx)] > l;
        }
      }
      if (edge) {
        for (std::size_t c = 0; c < 3; ++c) sketch.at(x, y, c) = 20;
      }
    }
  }
  return join_pair(color, sketch);
}

/// Writes `count` raw pairs named pair_00000.png, ... into `dir`.
inline void write_synth_dataset(const std::filesystem::path& dir, std::size_t count, std::size_t size,
                                std::uint64_t seed) {
  std::filesystem::create_directories(dir);
  for (std::size_t i = 0; i < count; ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "pair_%05zu.png", i);
    write_png(dir / name, synth_pair(size, derive_seed(seed, {i})));
  }
}

/// In-memory equivalent of synthesizing, preparing and loading a dataset.
inline Dataset synth_dataset(std::size_t n_train, std::size_t n_val, std::size_t size, std::uint64_t seed,
                             std::size_t sketch_channels = 3, std::size_t render_size = 0) {
  Dataset ds;
  ds.image_size = size;
  ds.sketch_channels = sketch_channels;
  const std::size_t render = render_size == 0 ? size : render_size;
  for (std::size_t i = 0; i < n_train + n_val; ++i) {
    char id[32];
    std::snprintf(id, sizeof id, "pair_%05zu", i);
    auto pair = make_pair(synth_pair(render, derive_seed(seed, {i})), size, sketch_channels, id);
    (i < n_train ? ds.train : ds.val).push_back(std::move(pair));
  }
  return ds;
}

}  // namespace inkgan
