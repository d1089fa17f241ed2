#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "a3syn/common.hpp"

namespace a3syn {

/// Row-major 8-bit image with interleaved channels.
template <int Channels>
struct ImageBuffer {
  static constexpr int kChannels = Channels;

  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;

  ImageBuffer() = default;
  ImageBuffer(int w, int h, std::uint8_t fill = 0)
      : width(w), height(h), data(static_cast<std::size_t>(w) * h * Channels, fill) {}

  std::size_t index(int x, int y) const {
    return (static_cast<std::size_t>(y) * width + x) * Channels;
  }
  std::uint8_t* at(int x, int y) { return data.data() + index(x, y); }
  const std::uint8_t* at(int x, int y) const { return data.data() + index(x, y); }
  bool same_size(const ImageBuffer& o) const { return width == o.width && height == o.height; }
  bool operator==(const ImageBuffer&) const = default;
};

using RgbImage = ImageBuffer<3>;

/// Binary mask; each byte is 0 or 1.
struct Mask : ImageBuffer<1> {
  using ImageBuffer<1>::ImageBuffer;

  bool get(int x, int y) const { return data[index(x, y)] != 0; }
  void set(int x, int y, bool v = true) { data[index(x, y)] = v ? 1 : 0; }
  std::size_t count() const;
  bool any() const { return count() > 0; }
  bool operator==(const Mask&) const = default;
};

/// Morphological dilation with a Euclidean disk of `radius_px`.
Mask dilate_mask(const Mask& mask, int radius_px);

/// 1 - |with| / |without|; 0 when the unoccluded mask is empty.
double occlusion_rate(const Mask& without_scene, const Mask& with_scene);

/// 2x2 layout, row-major: view 0 top-left, 1 top-right, 2 bottom-left, 3 bottom-right.
template <typename Img>
Img tile_grid(std::span<const Img, 4> tiles) {
  const int w = tiles[0].width;
  const int h = tiles[0].height;
  for (const auto& t : tiles) {
    if (t.width != w || t.height != h) throw ContractViolation("tile_grid needs four equal-size images");
  }
  Img out(2 * w, 2 * h);
  constexpr int c = Img::kChannels;
  for (int t = 0; t < 4; ++t) {
    const int ox = (t % 2) * w;
    const int oy = (t / 2) * h;
    for (int y = 0; y < h; ++y) {
      const auto* src = tiles[t].at(0, y);
      std::copy(src, src + static_cast<std::size_t>(w) * c, out.at(ox, oy + y));
    }
  }
  return out;
}

template <typename Img>
std::array<Img, 4> split_grid(const Img& grid) {
  if (grid.width % 2 != 0 || grid.height % 2 != 0) throw ContractViolation("split_grid needs even dimensions");
  const int w = grid.width / 2;
  const int h = grid.height / 2;
  constexpr int c = Img::kChannels;
  std::array<Img, 4> out;
  for (int t = 0; t < 4; ++t) {
    out[t] = Img(w, h);
    const int ox = (t % 2) * w;
    const int oy = (t / 2) * h;
    for (int y = 0; y < h; ++y) {
      const auto* src = grid.at(ox, oy + y);
      std::copy(src, src + static_cast<std::size_t>(w) * c, out[t].at(0, y));
    }
  }
  return out;
}

}  // namespace a3syn
