// 8-bit RGB raster images, PNG IO, and tile/context slicing. Level images
// are tiled into 16x16 sprites; the model input for one tile is its 3x3
// neighbourhood (48x48x3) with out-of-level neighbours edge-clamped.

#pragma once

#include <png.h>

#include <algorithm>
#include <array>
#include <cstdint>
#include <cstdio>
#include <memory>
#include <string>
#include <vector>

#include "cte/common.hpp"

namespace cte {

inline constexpr int kTileSize = 16;
inline constexpr int kContextSize = 3 * kTileSize;  // 48

struct Image {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> pixels;  // row-major RGB, 3 bytes per pixel

  static Image filled(int h, int w, std::uint8_t r, std::uint8_t g,
                      std::uint8_t b) {
    Image im;
    im.height = h;
    im.width = w;
    im.pixels.resize(static_cast<std::size_t>(h) * w * 3);
    for (std::size_t i = 0; i < im.pixels.size(); i += 3) {
      im.pixels[i] = r;
      im.pixels[i + 1] = g;
      im.pixels[i + 2] = b;
    }
    return im;
  }

  std::uint8_t* px(int y, int x) {
    return &pixels[(static_cast<std::size_t>(y) * width + x) * 3];
  }
  const std::uint8_t* px(int y, int x) const {
    return &pixels[(static_cast<std::size_t>(y) * width + x) * 3];
  }

  int tile_rows() const { return height / kTileSize; }
  int tile_cols() const { return width / kTileSize; }

  bool tiled() const {
    return height > 0 && width > 0 && height % kTileSize == 0 &&
           width % kTileSize == 0;
  }
};

namespace detail {
struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
}  // namespace detail

inline Image read_png(const std::string& path) {
  std::unique_ptr<std::FILE, detail::FileCloser> fp(
      std::fopen(path.c_str(), "rb"));
  if (!fp) throw FormatError("cannot open PNG: " + path);

  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw Error("png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw Error("png_create_info_struct failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw FormatError("failed to decode PNG: " + path);
  }
  png_init_io(png, fp.get());
  png_read_info(png, info);

  // Normalize every input to 8-bit RGB.
  png_set_expand(png);
  if (png_get_bit_depth(png, info) == 16) png_set_strip_16(png);
  png_set_strip_alpha(png);
  if (png_get_color_type(png, info) == PNG_COLOR_TYPE_GRAY ||
      png_get_color_type(png, info) == PNG_COLOR_TYPE_GRAY_ALPHA) {
    png_set_gray_to_rgb(png);
  }
  png_read_update_info(png, info);

  Image im;
  im.height = static_cast<int>(png_get_image_height(png, info));
  im.width = static_cast<int>(png_get_image_width(png, info));
  im.pixels.resize(static_cast<std::size_t>(im.height) * im.width * 3);
  std::vector<png_bytep> rows(im.height);
  for (int y = 0; y < im.height; ++y) rows[y] = im.px(y, 0);
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return im;
}

inline void write_png(const std::string& path, const Image& im) {
  require(im.height > 0 && im.width > 0, "write_png: empty image");
  std::unique_ptr<std::FILE, detail::FileCloser> fp(
      std::fopen(path.c_str(), "wb"));
  if (!fp) throw Error("cannot open for write: " + path);

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr,
                                            nullptr, nullptr);
  if (!png) throw Error("png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw Error("png_create_info_struct failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error("failed to encode PNG: " + path);
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, im.width, im.height, 8, PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<png_bytep> rows(im.height);
  for (int y = 0; y < im.height; ++y) {
    rows[y] = const_cast<png_bytep>(im.px(y, 0));
  }
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

// Checks the LevelImage invariant: dimensions are exact multiples of 16.
inline void check_level_image(const Image& im, const std::string& what) {
  if (!im.tiled()) {
    throw FormatError(what + ": image " + std::to_string(im.width) + "x" +
                      std::to_string(im.height) +
                      " is not a multiple of 16 in both dimensions");
  }
}

// The tile's own 16x16 patch, scaled to [0, 1], packed as [y][x][channel].
inline std::vector<double> tile_patch(const Image& im, int row, int col) {
  require(im.tiled(), "tile_patch: image not 16-aligned");
  if (row < 0 || col < 0 || row >= im.tile_rows() || col >= im.tile_cols()) {
    throw DimensionError("tile_patch: tile (" + std::to_string(row) + "," +
                         std::to_string(col) + ") out of range");
  }
  std::vector<double> out(kTileSize * kTileSize * 3);
  for (int y = 0; y < kTileSize; ++y) {
    const std::uint8_t* src = im.px(row * kTileSize + y, col * kTileSize);
    for (int x = 0; x < kTileSize * 3; ++x) {
      out[static_cast<std::size_t>(y) * kTileSize * 3 + x] = src[x] / 255.0;
    }
  }
  return out;
}

// Raw bytes of one 16x16 tile, used for byte-identity tile matching.
inline std::array<std::uint8_t, kTileSize * kTileSize * 3> tile_bytes(
    const Image& im, int row, int col) {
  std::array<std::uint8_t, kTileSize * kTileSize * 3> out{};
  for (int y = 0; y < kTileSize; ++y) {
    const std::uint8_t* src = im.px(row * kTileSize + y, col * kTileSize);
    std::copy(src, src + kTileSize * 3,
              out.begin() + static_cast<std::size_t>(y) * kTileSize * 3);
  }
  return out;
}

// 3x3 tile neighbourhood with the candidate centred, 48x48x3 in [0, 1].
// Out-of-level neighbours are filled by edge-clamping: each missing pixel
// takes the value of the nearest in-level pixel. The clamp policy is
// recorded in run metadata by the pipeline.
inline std::vector<double> slice_context(const Image& im, int row, int col) {
  require(im.tiled(), "slice_context: image not 16-aligned");
  if (row < 0 || col < 0 || row >= im.tile_rows() || col >= im.tile_cols()) {
    throw DimensionError("slice_context: tile (" + std::to_string(row) + "," +
                         std::to_string(col) + ") out of range");
  }
  std::vector<double> out(kContextSize * kContextSize * 3);
  const int y0 = (row - 1) * kTileSize;
  const int x0 = (col - 1) * kTileSize;
  for (int y = 0; y < kContextSize; ++y) {
    int sy = y0 + y;
    sy = sy < 0 ? 0 : (sy >= im.height ? im.height - 1 : sy);
    for (int x = 0; x < kContextSize; ++x) {
      int sx = x0 + x;
      sx = sx < 0 ? 0 : (sx >= im.width ? im.width - 1 : sx);
      const std::uint8_t* p = im.px(sy, sx);
      const std::size_t o = (static_cast<std::size_t>(y) * kContextSize + x) * 3;
      out[o] = p[0] / 255.0;
      out[o + 1] = p[1] / 255.0;
      out[o + 2] = p[2] / 255.0;
    }
  }
  return out;
}

// Stamps a 16x16 RGB sprite (48 bytes per row) onto a tile position.
inline void stamp_tile(Image& im, int row, int col,
                       const std::uint8_t* sprite) {
  for (int y = 0; y < kTileSize; ++y) {
    std::uint8_t* dst = im.px(row * kTileSize + y, col * kTileSize);
    const std::uint8_t* src = sprite + static_cast<std::size_t>(y) * kTileSize * 3;
    std::copy(src, src + kTileSize * 3, dst);
  }
}

}  // namespace cte
