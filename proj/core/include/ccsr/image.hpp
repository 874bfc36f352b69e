// Copyright 2026 The CCSR Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace ccsr {

/// 8-bit RGB raster, row-major, no padding.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;

  Image() = default;
  Image(int w, int h);

  std::uint8_t* at(int x, int y) { return &pixels[index(x, y)]; }
  const std::uint8_t* at(int x, int y) const { return &pixels[index(x, y)]; }

  friend bool operator==(const Image&, const Image&) = default;

 private:
  std::size_t index(int x, int y) const {
    return (static_cast<std::size_t>(y) * static_cast<std::size_t>(width) +
            static_cast<std::size_t>(x)) * 3;
  }
};

/// Stable content hash of the pixel data (dimensions included).
std::string content_id(const Image& image);

std::vector<std::uint8_t> encode_png(const Image& image);
Image decode_png(std::span<const std::uint8_t> bytes);

Image crop(const Image& source, int x, int y, int w, int h);
void blit(Image& target, const Image& tile, int x, int y);

}  // namespace ccsr
