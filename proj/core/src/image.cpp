// Copyright 2026 The CCSR Authors
// SPDX-License-Identifier: Apache-2.0

#include "ccsr/image.hpp"

#include <png.h>

#include <csetjmp>
#include <cstring>

#include <fmt/format.h>

#include "ccsr/digest.hpp"
#include "ccsr/errors.hpp"

namespace ccsr {

Image::Image(int w, int h) : width(w), height(h) {
  if (w <= 0 || h <= 0) {
    throw ArgumentError(fmt::format("image size must be positive, got {}x{}", w, h));
  }
  pixels.assign(static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * 3, 0);
}

std::string content_id(const Image& image) {
  Sha256 h;
  h.update(fmt::format("rgb8:{}x{}:", image.width, image.height));
  h.update(std::span<const std::uint8_t>(image.pixels));
  return h.hex();
}

namespace {

void png_warning_fn(png_structp, png_const_charp) {}

struct WriteBuffer {
  std::vector<std::uint8_t>* out;
};

void png_write_fn(png_structp png, png_bytep data, png_size_t len) {
  auto* buf = static_cast<WriteBuffer*>(png_get_io_ptr(png));
  buf->out->insert(buf->out->end(), data, data + len);
}

void png_flush_fn(png_structp) {}

struct ReadBuffer {
  std::span<const std::uint8_t> in;
  std::size_t offset = 0;
};

void png_read_fn(png_structp png, png_bytep data, png_size_t len) {
  auto* buf = static_cast<ReadBuffer*>(png_get_io_ptr(png));
  if (buf->offset + len > buf->in.size()) png_error(png, "truncated stream");
  std::memcpy(data, buf->in.data() + buf->offset, len);
  buf->offset += len;
}

}  // namespace

std::vector<std::uint8_t> encode_png(const Image& image) {
  std::vector<std::uint8_t> out;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr,
                                            nullptr, png_warning_fn);
  png_infop info = png_create_info_struct(png);
  WriteBuffer buffer{&out};
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("png: encode failed");
  }
  {
    png_set_write_fn(png, &buffer, png_write_fn, png_flush_fn);
    png_set_compression_level(png, 6);
    png_set_IHDR(png, info, static_cast<png_uint_32>(image.width),
                 static_cast<png_uint_32>(image.height), 8, PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    const std::size_t stride = static_cast<std::size_t>(image.width) * 3;
    for (int y = 0; y < image.height; ++y) {
      png_write_row(png, const_cast<png_bytep>(image.pixels.data() +
                                               stride * static_cast<std::size_t>(y)));
    }
    png_write_end(png, nullptr);
  }
  png_destroy_write_struct(&png, &info);
  return out;
}

Image decode_png(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0) {
    throw IoError("png: bad signature");
  }
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr,
                                           nullptr, png_warning_fn);
  png_infop info = png_create_info_struct(png);
  ReadBuffer buffer{bytes, 0};
  Image image;
  png_uint_32 width = 0;
  png_uint_32 height = 0;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("png: decode failed");
  }
  {
    png_set_read_fn(png, &buffer, png_read_fn);
    png_read_info(png, info);
    const auto color = png_get_color_type(png, info);
    const auto depth = png_get_bit_depth(png, info);
    if (depth == 16) png_set_strip_16(png);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) {
      if (depth < 8) png_set_expand_gray_1_2_4_to_8(png);
      png_set_gray_to_rgb(png);
    }
    if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    png_read_update_info(png, info);
    width = png_get_image_width(png, info);
    height = png_get_image_height(png, info);
    image.width = static_cast<int>(width);
    image.height = static_cast<int>(height);
    image.pixels.resize(static_cast<std::size_t>(width) * height * 3);
    const std::size_t stride = static_cast<std::size_t>(image.width) * 3;
    for (int y = 0; y < image.height; ++y) {
      png_read_row(png, image.pixels.data() + stride * static_cast<std::size_t>(y),
                   nullptr);
    }
    png_read_end(png, nullptr);
  }
  png_destroy_read_struct(&png, &info, nullptr);
  return image;
}

Image crop(const Image& source, int x, int y, int w, int h) {
  if (x < 0 || y < 0 || x + w > source.width || y + h > source.height) {
    throw ArgumentError(fmt::format("crop {}x{}+{}+{} outside {}x{} image", w, h,
                                    x, y, source.width, source.height));
  }
  Image out(w, h);
  for (int row = 0; row < h; ++row) {
    std::memcpy(out.at(0, row), source.at(x, y + row), static_cast<std::size_t>(w) * 3);
  }
  return out;
}

void blit(Image& target, const Image& tile, int x, int y) {
  if (x < 0 || y < 0 || x + tile.width > target.width ||
      y + tile.height > target.height) {
    throw ArgumentError("blit outside target image");
  }
  for (int row = 0; row < tile.height; ++row) {
    std::memcpy(target.at(x, y + row), tile.at(0, row),
                static_cast<std::size_t>(tile.width) * 3);
  }
}

}  // namespace ccsr
